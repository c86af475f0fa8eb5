#pragma once

#include "sentiforest/common.hpp"
#include "sentiforest/corpus.hpp"
#include "sentiforest/eval.hpp"
#include "sentiforest/features.hpp"
#include "sentiforest/forest.hpp"
#include "sentiforest/lexicon.hpp"
#include "sentiforest/stemmer.hpp"
#include "sentiforest/textprep.hpp"
