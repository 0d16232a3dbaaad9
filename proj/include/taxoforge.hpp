#pragma once

#include "taxoforge/embedding.hpp"
#include "taxoforge/error.hpp"
#include "taxoforge/evaluation.hpp"
#include "taxoforge/expansion.hpp"
#include "taxoforge/journal.hpp"
#include "taxoforge/link_pruning.hpp"
#include "taxoforge/recommender.hpp"
#include "taxoforge/taxonomy.hpp"
#include "taxoforge/text.hpp"
#include "taxoforge/workspace.hpp"
