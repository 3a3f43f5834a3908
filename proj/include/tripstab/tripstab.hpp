#pragma once

#include "tripstab/checks.hpp"
#include "tripstab/config.hpp"
#include "tripstab/core.hpp"
#include "tripstab/error.hpp"
#include "tripstab/lab.hpp"
#include "tripstab/loss.hpp"
#include "tripstab/numeric.hpp"
#include "tripstab/optim.hpp"
#include "tripstab/risk.hpp"
#include "tripstab/stability.hpp"
#include "tripstab/synth.hpp"
