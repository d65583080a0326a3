#pragma once

#include <string>

#include "peq/types.hpp"

namespace peq {

// JSON-lines persistence. One trajectory per line:
//   {"id": str, "L": [[f64; d_l]; tau], "A": [0|1; tau], "Y": f64}
// Doubles survive a round-trip exactly (shortest-representation printing).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace peq
