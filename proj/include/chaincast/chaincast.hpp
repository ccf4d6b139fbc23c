#pragma once

#include "chaincast/adam.hpp"
#include "chaincast/errors.hpp"
#include "chaincast/eval.hpp"
#include "chaincast/finetune.hpp"
#include "chaincast/mlp.hpp"
#include "chaincast/state_space.hpp"
#include "chaincast/trace.hpp"
#include "chaincast/transition.hpp"
