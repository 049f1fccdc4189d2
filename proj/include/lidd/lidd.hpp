#pragma once

#include "lidd/core.hpp"
#include "lidd/timeseries.hpp"
#include "lidd/similarity.hpp"
#include "lidd/clustering.hpp"
#include "lidd/divergence.hpp"
#include "lidd/serialize.hpp"
#include "lidd/render.hpp"
#include "lidd/report.hpp"
#include "lidd/synthetic.hpp"
#include "lidd/pipeline.hpp"
#include "lidd/commands.hpp"
