#pragma once

#include <vector>

#include "evdet/event_model.hpp"
#include "evdet/grid.hpp"

namespace evdet {

/// Final output of the detector for one propeller area.
struct Detection {
  BBox bbox;
  int s_p = 0;
  double s_s = 0.0;
  /// Segmented saliency cells backing `bbox`.
  std::vector<Pixel> pixels;

  friend bool operator==(const Detection&, const Detection&) = default;
};

}  // namespace evdet
