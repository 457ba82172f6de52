#pragma once

#include "cvsketch/aggregation.hpp"
#include "cvsketch/control_variates.hpp"
#include "cvsketch/datasets.hpp"
#include "cvsketch/error.hpp"
#include "cvsketch/format.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/harness.hpp"
#include "cvsketch/hashing.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/oracle.hpp"
#include "cvsketch/point_query.hpp"
#include "cvsketch/random.hpp"
#include "cvsketch/serialize.hpp"
#include "cvsketch/theory.hpp"
#include "cvsketch/tug_of_war.hpp"
#include "cvsketch/verify.hpp"
