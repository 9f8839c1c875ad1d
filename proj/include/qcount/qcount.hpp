#pragma once

// Umbrella header for the whole library.

#include "qcount/core.hpp"       // IWYU pragma: export
#include "qcount/binomial.hpp"   // IWYU pragma: export
#include "qcount/oracle.hpp"     // IWYU pragma: export
#include "qcount/stage1.hpp"     // IWYU pragma: export
#include "qcount/stage2.hpp"     // IWYU pragma: export
#include "qcount/driver.hpp"     // IWYU pragma: export
#include "qcount/harness.hpp"    // IWYU pragma: export
