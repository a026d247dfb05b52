#include <doctest.h>

#include "fixtures.h"

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed : {101u, 202u, 303u, 404u}) {
    for (const auto& c : fixtures::gradient_configuration(seed)) {
      CAPTURE(c.module);
      CAPTURE(c.detail);
      CAPTURE(c.result.worst_param);
      CHECK(c.result.checked > 0);
      CHECK(c.result.worst_error < 1e-3);
    }
  }
}
