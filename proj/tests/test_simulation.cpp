#include <updens/simulation.hpp>

#include <gtest/gtest.h>

#include <string>
#include <vector>

using namespace updens;

namespace {

const std::string simulator = UPDENS_LINE_SIMULATOR;

ErrorCode code_of(const std::function<void()>& f)
{
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

} // namespace

TEST(ProcessSimulator, RoundTrips)
{
  const auto sim = make_process_simulator(simulator + " sum 0.5");
  const std::vector<double> x{1.0, 2.0, 0.25};
  EXPECT_DOUBLE_EQ(sim(x), 3.75);
  Matrix pts(3, 2);
  pts << 1, 1, 2, 2, 0.1, 0.2;
  const Vector y = sim.evaluate(pts);
  EXPECT_DOUBLE_EQ(y(1), 4.5);
  EXPECT_NEAR(y(2), 0.8, 1e-15);
}

TEST(ProcessSimulator, ExactDecimalTransport)
{
  const auto sim = make_process_simulator(simulator + " sum");
  const std::vector<double> x{0.1 + 0.2};
  EXPECT_EQ(sim(x), 0.1 + 0.2);
}

TEST(ProcessSimulator, ProtocolViolations)
{
  EXPECT_EQ(code_of([] {
              const auto sim = make_process_simulator(simulator + " garbage");
              sim(std::vector<double>{1.0});
            }),
            ErrorCode::SimulatorProtocolError);
  EXPECT_EQ(code_of([] {
              const auto sim = make_process_simulator("exit 0");
              sim(std::vector<double>{1.0});
            }),
            ErrorCode::SimulatorProtocolError);
  EXPECT_EQ(code_of([] { ProcessSimulator::parse_response("1.5 2"); }), ErrorCode::SimulatorProtocolError);
  EXPECT_EQ(code_of([] { ProcessSimulator::parse_response("inf"); }), ErrorCode::SimulatorProtocolError);
  EXPECT_DOUBLE_EQ(ProcessSimulator::parse_response("-2.5e-3 "), -2.5e-3);
}

TEST(SimulationModel, RejectsNonFinite)
{
  const SimulationModel m("nan", [](std::span<const double>) { return std::nan(""); });
  EXPECT_EQ(code_of([&] { m(std::vector<double>{0.0}); }), ErrorCode::NonFiniteData);
}
