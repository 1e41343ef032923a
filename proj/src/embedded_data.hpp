#pragma once

#include <string_view>

namespace cabs_eval::data {

extern const std::string_view kOrganAliasesJson;
extern const std::string_view kEntityLexiconJson;

}  // namespace cabs_eval::data
