// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "oprior/core/eigen.hpp"
#include "oprior/core/episode.hpp"
#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/eval/alignment.hpp"
#include "oprior/eval/describe.hpp"
#include "oprior/eval/spectrum.hpp"
#include "oprior/eval/wasserstein.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/io/config.hpp"
#include "oprior/io/csv.hpp"
#include "oprior/io/episode_file.hpp"
#include "oprior/io/manifest.hpp"
#include "oprior/pipeline.hpp"
#include "oprior/qc.hpp"
#include "oprior/realism/augment.hpp"
#include "oprior/realism/missingness.hpp"
#include "oprior/realism/morph.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/subgroup.hpp"
#include "oprior/realism/table.hpp"
#include "oprior/realism/target.hpp"
#include "oprior/scm/dag.hpp"
#include "oprior/scm/linalg.hpp"
#include "oprior/scm/mechanisms.hpp"
#include "oprior/scm/selection.hpp"
#include "oprior/scm/tree.hpp"
#include "oprior/shift.hpp"
#include "oprior/variant.hpp"
