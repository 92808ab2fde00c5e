#pragma once

#include "rssiloc/bundle.hpp"
#include "rssiloc/channel.hpp"
#include "rssiloc/classify.hpp"
#include "rssiloc/dataset.hpp"
#include "rssiloc/error.hpp"
#include "rssiloc/eval.hpp"
#include "rssiloc/features.hpp"
#include "rssiloc/io.hpp"
#include "rssiloc/matrix.hpp"
#include "rssiloc/model.hpp"
#include "rssiloc/pf.hpp"
#include "rssiloc/scenario.hpp"
#include "rssiloc/seeding.hpp"
#include "rssiloc/synth.hpp"
