#pragma once

#include "segcd/ccl.hpp"
#include "segcd/error.hpp"
#include "segcd/eval.hpp"
#include "segcd/io.hpp"
#include "segcd/mask.hpp"
#include "segcd/noprompt.hpp"
#include "segcd/prompt.hpp"
#include "segcd/raster.hpp"
#include "segcd/synth.hpp"
