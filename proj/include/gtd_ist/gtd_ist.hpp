#pragma once

#include "gtd_ist/envs.hpp"
#include "gtd_ist/errors.hpp"
#include "gtd_ist/harness.hpp"
#include "gtd_ist/learners.hpp"
#include "gtd_ist/mdp_model.hpp"
#include "gtd_ist/objectives.hpp"
#include "gtd_ist/prox.hpp"
