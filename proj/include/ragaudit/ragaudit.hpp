#pragma once

// Convenience header pulling in the whole library.

#include "ragaudit/artifacts.hpp"
#include "ragaudit/backends.hpp"
#include "ragaudit/cache.hpp"
#include "ragaudit/chunker.hpp"
#include "ragaudit/client.hpp"
#include "ragaudit/core.hpp"
#include "ragaudit/dataset.hpp"
#include "ragaudit/judge.hpp"
#include "ragaudit/normalize.hpp"
#include "ragaudit/pipeline.hpp"
#include "ragaudit/predictor.hpp"
#include "ragaudit/report.hpp"
#include "ragaudit/selective.hpp"
#include "ragaudit/sha256.hpp"
#include "ragaudit/signals.hpp"
#include "ragaudit/sufficiency.hpp"
#include "ragaudit/templates.hpp"
#include "ragaudit/tokenizer.hpp"
