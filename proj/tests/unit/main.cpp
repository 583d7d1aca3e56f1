#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <spdlog/spdlog.h>

namespace {
const bool quiet = [] {
  spdlog::set_level(spdlog::level::err);
  return true;
}();
}
