#pragma once

#include <string_view>

// Default data files compiled into the library.
namespace dialbench::bundled {

std::string_view emotion_lexicon_tsv();
std::string_view pe_rules_json();
std::string_view stopwords_txt();

}  // namespace dialbench::bundled
