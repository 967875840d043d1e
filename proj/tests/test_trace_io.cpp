#include <hydla/hydla.hpp>
#include <catch2/catch_amalgamated.hpp>

TEST_CASE("stub") { REQUIRE(true); }
