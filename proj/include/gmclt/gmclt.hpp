#pragma once

#include "gmclt/arrays.hpp"
#include "gmclt/clt.hpp"
#include "gmclt/error.hpp"
#include "gmclt/example5.hpp"
#include "gmclt/io.hpp"
#include "gmclt/observables.hpp"
#include "gmclt/parallel.hpp"
#include "gmclt/random.hpp"
#include "gmclt/run.hpp"
#include "gmclt/stats.hpp"
#include "gmclt/systems.hpp"
#include "gmclt/transfer.hpp"
#include "gmclt/wilcoxon.hpp"
