#pragma once

#include "ricci_mon/graph.hpp"
#include "ricci_mon/snapshot_io.hpp"
#include "ricci_mon/feed.hpp"
#include "ricci_mon/ot.hpp"
#include "ricci_mon/curvature.hpp"
#include "ricci_mon/detector.hpp"
#include "ricci_mon/landmarks.hpp"
#include "ricci_mon/root_cause.hpp"
#include "ricci_mon/synth.hpp"
#include "ricci_mon/pipeline.hpp"
