#pragma once

#include <string>
#include <vector>

#include "analysis.hpp"
#include "harness.hpp"

namespace backplay {

// Success rate against epoch, one line per (regime, gap) with the mean over
// seeds and a min/max band when there are several seeds. A dashed marker is
// drawn at marker_epoch when it is >= 0.
std::string learning_curve_svg(const std::vector<RunRecord>& records, int marker_epoch,
                               const std::string& title = "Success rate from the initial state");

// Mean trials against M on a log axis, one series per strategy, with the
// predicted rate (scaled to the first measured point) dashed.
std::string sweep_svg(const std::vector<ComplexityRecord>& rows,
                      const std::string& title = "Trials until level M is solved");

}  // namespace backplay
