#pragma once

#include "evhand/camera.hpp"
#include "evhand/common.hpp"
#include "evhand/event_io.hpp"
#include "evhand/events.hpp"
#include "evhand/fitter.hpp"
#include "evhand/flow.hpp"
#include "evhand/grid.hpp"
#include "evhand/hand_model.hpp"
#include "evhand/losses.hpp"
#include "evhand/metrics.hpp"
#include "evhand/pose_io.hpp"
#include "evhand/raster.hpp"
#include "evhand/simulator.hpp"
#include "evhand/warp.hpp"
