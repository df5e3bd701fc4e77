#include <doctest.h>

TEST_SUITE("oodgen") {}
