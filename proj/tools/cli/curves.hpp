#pragma once

#include <string>

#include "clfp/training.hpp"

namespace clfp::cli {

// Five stacked line charts (loss, accuracy, precision, recall, auc against
// epoch), train and validation on each. Returns the SVG document.
std::string render_curves_svg(const TrainLog& log);

}  // namespace clfp::cli
