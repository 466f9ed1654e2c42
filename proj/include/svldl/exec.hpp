#pragma once

namespace svldl {

// Selects between the OpenMP kernels and the serial reference kernels.
// Both produce bitwise-identical results: parallel loops only fill
// per-item slots and every reduction runs serially in index order.
enum class Backend { serial, parallel };

}  // namespace svldl
