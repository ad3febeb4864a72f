// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace countlab {

/// Selects the serial reference loop or the OpenMP loop for data-parallel kernels.
enum class Exec { serial, parallel };

}  // namespace countlab
