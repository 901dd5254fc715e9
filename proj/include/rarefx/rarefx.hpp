#pragma once

#include "rarefx/adaptive_loss.hpp"
#include "rarefx/ar_inference.hpp"
#include "rarefx/baselines.hpp"
#include "rarefx/dates.hpp"
#include "rarefx/error.hpp"
#include "rarefx/forecaster.hpp"
#include "rarefx/impact.hpp"
#include "rarefx/io.hpp"
#include "rarefx/matrix.hpp"
#include "rarefx/mlp.hpp"
#include "rarefx/montecarlo.hpp"
#include "rarefx/panel.hpp"
#include "rarefx/pipeline.hpp"
#include "rarefx/random.hpp"
#include "rarefx/report.hpp"
#include "rarefx/rolling_window.hpp"
#include "rarefx/stats.hpp"
#include "rarefx/synthetic.hpp"
