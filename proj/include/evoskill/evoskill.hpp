#pragma once

#include "evoskill/catalog.hpp"
#include "evoskill/gateway.hpp"
#include "evoskill/harness.hpp"
#include "evoskill/journal.hpp"
#include "evoskill/loop.hpp"
#include "evoskill/retrieval.hpp"
#include "evoskill/router.hpp"
#include "evoskill/skill_store.hpp"
#include "evoskill/synth_queries.hpp"
#include "evoskill/text.hpp"
