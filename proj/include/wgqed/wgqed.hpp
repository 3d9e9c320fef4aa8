#pragma once

#include "config.hpp"
#include "dynamics.hpp"
#include "filtering.hpp"
#include "io_relations.hpp"
#include "kernel.hpp"
#include "network.hpp"
#include "operators.hpp"
#include "report.hpp"
