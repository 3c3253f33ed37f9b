#pragma once

// Umbrella header: subflow-based known/unknown traffic classification.

#include "flowsift/baselines.hpp"
#include "flowsift/classify.hpp"
#include "flowsift/eval.hpp"
#include "flowsift/features.hpp"
#include "flowsift/flow.hpp"
#include "flowsift/gbdt.hpp"
#include "flowsift/likelihood.hpp"
#include "flowsift/model_io.hpp"
#include "flowsift/packet_io.hpp"
#include "flowsift/synth.hpp"
#include "flowsift/types.hpp"
#include "flowsift/version.hpp"
