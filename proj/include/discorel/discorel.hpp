#pragma once

#include "discorel/error.hpp"
#include "discorel/text.hpp"
#include "discorel/taxonomy.hpp"
#include "discorel/corpus.hpp"
#include "discorel/discogem_import.hpp"
#include "discorel/dc_engine.hpp"
#include "discorel/qa_engine.hpp"
#include "discorel/agreement.hpp"
#include "discorel/bias.hpp"
#include "discorel/classifier.hpp"
#include "discorel/service.hpp"
