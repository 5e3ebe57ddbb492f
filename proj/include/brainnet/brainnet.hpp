#pragma once

#include "brainnet/augment.hpp"
#include "brainnet/ensemble.hpp"
#include "brainnet/error.hpp"
#include "brainnet/grid.hpp"
#include "brainnet/lossmath.hpp"
#include "brainnet/metrics.hpp"
#include "brainnet/nifti.hpp"
#include "brainnet/png_io.hpp"
#include "brainnet/preprocess.hpp"
#include "brainnet/report.hpp"
#include "brainnet/split.hpp"
#include "brainnet/volume_io.hpp"
