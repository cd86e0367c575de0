#pragma once

// Umbrella header.

#include "evdet/baseline_detector.hpp"
#include "evdet/config.hpp"
#include "evdet/demo.hpp"
#include "evdet/detections.hpp"
#include "evdet/dvs_sim.hpp"
#include "evdet/errors.hpp"
#include "evdet/evaluation.hpp"
#include "evdet/event_model.hpp"
#include "evdet/frame_synthesis.hpp"
#include "evdet/geometry.hpp"
#include "evdet/overlay.hpp"
#include "evdet/pgm.hpp"
#include "evdet/pseudolabel.hpp"
#include "evdet/scene.hpp"
