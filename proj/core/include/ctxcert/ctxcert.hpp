#pragma once

#include "ctxcert/certify.hpp"
#include "ctxcert/dataset.hpp"
#include "ctxcert/error.hpp"
#include "ctxcert/model.hpp"
#include "ctxcert/npy.hpp"
#include "ctxcert/perturb.hpp"
#include "ctxcert/ppm.hpp"
#include "ctxcert/reporting.hpp"
#include "ctxcert/search.hpp"
#include "ctxcert/svg.hpp"
#include "ctxcert/tensor.hpp"

namespace ctxcert {
inline constexpr const char *kVersion = "0.1.0";
}
