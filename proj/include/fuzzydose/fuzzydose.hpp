#pragma once

#include "fuzzydose/bench.hpp"
#include "fuzzydose/control.hpp"
#include "fuzzydose/dsl.hpp"
#include "fuzzydose/errors.hpp"
#include "fuzzydose/fis.hpp"
#include "fuzzydose/hydro.hpp"
#include "fuzzydose/membership.hpp"
#include "fuzzydose/reservoir.hpp"
