#pragma once

#include "lamd/audit.hpp"
#include "lamd/autodiff.hpp"
#include "lamd/checkpoint.hpp"
#include "lamd/data.hpp"
#include "lamd/distortions.hpp"
#include "lamd/error.hpp"
#include "lamd/image_io.hpp"
#include "lamd/models.hpp"
#include "lamd/optim.hpp"
#include "lamd/parallel.hpp"
#include "lamd/recovery.hpp"
#include "lamd/rng.hpp"
#include "lamd/stats.hpp"
#include "lamd/svg.hpp"
#include "lamd/tensor.hpp"
#include "lamd/train.hpp"
