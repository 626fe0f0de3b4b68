#pragma once

#include "optable/dynamic_detect.hpp"
#include "optable/imaging.hpp"

namespace optable {

/// Visual summary of a change map on top of the 'after' frame: appeared
/// pixels blend toward green, disappeared pixels show the 'before' frame
/// blended toward red. Where both fire, the region is green with a red
/// outline.
RasterImage render_overlay(const RasterImage& before, const RasterImage& after, const ChangeMap& changes,
                           double threshold);

}  // namespace optable
