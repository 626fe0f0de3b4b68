#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"

namespace {

struct Outcome {
    int status;
    std::string out;
    std::string err;
};

Outcome run_cli(const testing::TempDir& dir, const std::string& args) {
    const std::string cmd = std::string("\"") + OPTABLE_CLI_PATH + "\" " + args + " >\"" + (dir / "stdout").string() +
                            "\" 2>\"" + (dir / "stderr").string() + "\"";
    const int raw = std::system(cmd.c_str());
    const int status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return {status, testing::read_file(dir / "stdout"), testing::read_file(dir / "stderr")};
}

}  // namespace

TEST_CASE("cli reports missing inputs on one line with a nonzero exit") {
    testing::TempDir dir;
    const Outcome o = run_cli(dir, "loocv-static --manifest \"" + (dir / "none.csv").string() + "\"");
    CHECK(o.status != 0);
    CHECK(o.err.rfind("error: input: ", 0) == 0);
    CHECK(std::count(o.err.begin(), o.err.end(), '\n') == 1);
}

TEST_CASE("cli rejects unknown config keys") {
    testing::TempDir dir;
    const Outcome o = run_cli(dir, "synth --kind static --n 2 --set bogus=1 --out-dir \"" + (dir / "d").string() + "\"");
    CHECK(o.status != 0);
    CHECK(o.err.rfind("error: input: ", 0) == 0);
    CHECK(o.err.find("bogus") != std::string::npos);
}

TEST_CASE("cli usage errors exit with status 2") {
    testing::TempDir dir;
    CHECK(run_cli(dir, "no-such-command").status == 2);
    CHECK(run_cli(dir, "segment --image x.png").status == 2);
}

TEST_CASE("cli outputs do not depend on the thread count") {
    testing::TempDir dir;
    const std::string data = (dir / "data").string();
    REQUIRE(run_cli(dir, "synth --kind static --n 3 --width 160 --height 120 --out-dir \"" + data + "\"").status == 0);
    const std::string common = "loocv-static --manifest \"" + data + "/manifest.csv\" --set downsample=false ";
    const Outcome one = run_cli(dir, common + "--set threads=1 --out-dir \"" + (dir / "t1").string() + "\"");
    const Outcome four = run_cli(dir, common + "--set threads=4 --out-dir \"" + (dir / "t4").string() + "\"");
    REQUIRE(one.status == 0);
    REQUIRE(four.status == 0);
    CHECK(one.out == four.out);
    CHECK(one.out.find("static az mean/std: ") != std::string::npos);
    CHECK(testing::read_file(dir / "t1" / "static_report.csv") == testing::read_file(dir / "t4" / "static_report.csv"));
    for (const char* name : {"image_000_prob.png", "image_002_prob.png"}) {
        CHECK(testing::read_file(dir / "t1" / "maps" / name) == testing::read_file(dir / "t4" / "maps" / name));
    }
}
