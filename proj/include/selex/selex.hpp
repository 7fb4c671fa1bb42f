#pragma once
// Umbrella header.

#include "selex/matrix.hpp"
#include "selex/rng.hpp"
#include "selex/labels.hpp"
#include "selex/bssk.hpp"
#include "selex/hssk.hpp"
#include "selex/targets.hpp"
#include "selex/loss.hpp"
#include "selex/synth.hpp"
#include "selex/train.hpp"
#include "selex/eval.hpp"
#include "selex/io.hpp"
