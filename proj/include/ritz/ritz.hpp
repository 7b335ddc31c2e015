#pragma once

#include "ritz/block_lanczos.hpp"
#include "ritz/chebfsi.hpp"
#include "ritz/column_block.hpp"
#include "ritz/dense.hpp"
#include "ritz/errors.hpp"
#include "ritz/hybrid.hpp"
#include "ritz/instrumentation.hpp"
#include "ritz/lanczos.hpp"
#include "ritz/lobpcg.hpp"
#include "ritz/matrix_market.hpp"
#include "ritz/problems.hpp"
#include "ritz/report.hpp"
#include "ritz/rmm_diis.hpp"
#include "ritz/rng.hpp"
#include "ritz/sparse.hpp"
#include "ritz/stats.hpp"
