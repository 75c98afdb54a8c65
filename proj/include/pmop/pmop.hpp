#pragma once

#include "baselines.hpp"
#include "constant.hpp"
#include "core.hpp"
#include "dataio.hpp"
#include "fd.hpp"
#include "general.hpp"
#include "loss.hpp"
#include "metrics.hpp"
#include "model_file.hpp"
#include "optim.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "scoring.hpp"
#include "synthetic.hpp"
#include "text.hpp"
