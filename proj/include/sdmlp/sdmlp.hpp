#pragma once

#include "sdmlp/data.hpp"
#include "sdmlp/errors.hpp"
#include "sdmlp/export.hpp"
#include "sdmlp/image.hpp"
#include "sdmlp/metrics.hpp"
#include "sdmlp/nn.hpp"
#include "sdmlp/numerics.hpp"
#include "sdmlp/optim.hpp"
#include "sdmlp/pipeline.hpp"
#include "sdmlp/gradcheck.hpp"
