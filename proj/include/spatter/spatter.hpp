#pragma once

#include "spatter/errors.hpp"
#include "spatter/grid.hpp"
#include "spatter/rng.hpp"
#include "spatter/core_model.hpp"
#include "spatter/homography.hpp"
#include "spatter/image.hpp"
#include "spatter/pgm.hpp"
#include "spatter/imaging.hpp"
#include "spatter/angles.hpp"
#include "spatter/frame_synth.hpp"
#include "spatter/segmentation.hpp"
#include "spatter/parallel.hpp"
#include "spatter/registration.hpp"
#include "spatter/fpp.hpp"
#include "spatter/csv.hpp"
#include "spatter/analytics.hpp"
#include "spatter/svr.hpp"
#include "spatter/config.hpp"
