#pragma once

#include "mep/calendar.hpp"
#include "mep/design.hpp"
#include "mep/detect.hpp"
#include "mep/error.hpp"
#include "mep/eval.hpp"
#include "mep/ingest.hpp"
#include "mep/model.hpp"
#include "mep/report.hpp"
#include "mep/rng.hpp"
#include "mep/synth.hpp"
