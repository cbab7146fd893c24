#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ambitwin/mlp.hpp"
#include "oracles.hpp"

using namespace ambitwin;

namespace {

Sample random_sample(Rng &rng, std::size_t width) {
  Sample s;
  for (std::size_t i = 0; i < width; ++i) {
    s.input.push_back(rng.uniform01());
  }
  s.target = rng.uniform01();
  return s;
}

} // namespace

TEST(NetConfig, RejectsDegenerateLayouts) {
  EXPECT_THROW(Mlp::init({{14}, 0.5, 1}), ConfigError);
  EXPECT_THROW(Mlp::init({{14, 0, 1}, 0.5, 1}), ConfigError);
  EXPECT_THROW(Mlp::init({{14, 25, 1}, -0.1, 1}), ConfigError);
  EXPECT_NO_THROW(Mlp::init({{14, 25, 1}, 0.0, 1}));
}

TEST(InitMlp, ZeroHalfWidthGivesZeroWeightsAndHalfOutputs) {
  const Mlp net = init_mlp({{3, 4, 1}, 0.0, 9});
  for (const auto &layer : net.layers()) {
    for (double w : layer.weights) {
      EXPECT_EQ(w, 0.0);
    }
    for (double b : layer.bias) {
      EXPECT_EQ(b, 0.0);
    }
  }
  const std::vector<double> in{0.3, -2.0, 7.0};
  const auto acts = forward(net, in);
  for (std::size_t l = 1; l < acts.size(); ++l) {
    for (double a : acts[l]) {
      EXPECT_EQ(a, 0.5);
    }
  }
}

TEST(InitMlp, SameSeedIsBitIdentical) {
  const NetConfig cfg{{14, 25, 1}, 0.5, 1234};
  EXPECT_EQ(init_mlp(cfg), init_mlp(cfg));
  NetConfig other = cfg;
  other.seed = 1235;
  EXPECT_NE(init_mlp(cfg), init_mlp(other));
}

TEST(InitMlp, WeightsStayInsideHalfWidth) {
  const Mlp net = init_mlp({{14, 25, 1}, 0.5, 77});
  EXPECT_EQ(net.parameter_count(), 14u * 25u + 25u + 25u + 1u);
  double lo = 1.0;
  double hi = -1.0;
  for (const auto &layer : net.layers()) {
    for (double w : layer.weights) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    for (double b : layer.bias) {
      lo = std::min(lo, b);
      hi = std::max(hi, b);
    }
  }
  EXPECT_GE(lo, -0.5);
  EXPECT_LE(hi, 0.5);
  // 401 draws should spread over most of the interval.
  EXPECT_LT(lo, -0.4);
  EXPECT_GT(hi, 0.4);
}

TEST(Forward, OnesNetworkMatchesScalarComputation) {
  DenseLayer l1(1, 1);
  l1.weights = {1.0};
  l1.bias = {1.0};
  DenseLayer l2(1, 1);
  l2.weights = {1.0};
  l2.bias = {1.0};
  const Mlp net({l1, l2});
  const auto acts = forward(net, std::vector<double>{0.0});
  const double hidden = 1.0 / (1.0 + std::exp(-1.0));
  const double out = 1.0 / (1.0 + std::exp(-(hidden + 1.0)));
  EXPECT_NEAR(acts[1][0], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(acts[1][0], hidden, 1e-15);
  EXPECT_NEAR(acts[2][0], out, 1e-15);
  EXPECT_NEAR(acts[2][0], 0.8495, 1e-4);
}

TEST(Forward, ActivationsStayStrictlyInsideUnitInterval) {
  const Mlp net = init_mlp({{14, 25, 1}, 0.5, 5});
  Rng rng(6);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> in(14);
    for (double &v : in) {
      v = rng.uniform(-3.0, 3.0);
    }
    const auto acts = forward(net, in);
    for (std::size_t l = 1; l < acts.size(); ++l) {
      for (double a : acts[l]) {
        ASSERT_GT(a, 0.0);
        ASSERT_LT(a, 1.0);
      }
    }
    EXPECT_EQ(predict(net, in), acts.back().front());
  }
}

TEST(Forward, RejectsWrongWidth) {
  const Mlp net = init_mlp({{14, 25, 1}, 0.5, 5});
  EXPECT_THROW(forward(net, std::vector<double>(13, 0.0)), ContractError);
  EXPECT_THROW(predict(net, std::vector<double>(15, 0.0)), ContractError);
}

TEST(Forward, HugePreActivationsDoNotProduceNaN) {
  DenseLayer l(1, 1);
  l.weights = {1e300};
  l.bias = {0.0};
  const Mlp net({l});
  EXPECT_TRUE(std::isfinite(predict(net, std::vector<double>{1.0})));
  EXPECT_TRUE(std::isfinite(predict(net, std::vector<double>{-1.0})));
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
  Rng rng(2024);
  for (const auto &sizes : {std::vector<std::size_t>{14, 25, 1}, std::vector<std::size_t>{24, 14, 1}}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Mlp net = init_mlp({sizes, 1.0, rng.next_u64()});
      const Sample s = random_sample(rng, sizes.front());
      const auto analytic = oracle::flatten(gradient(net, s).layers);
      const auto numeric = oracle::finite_difference_gradient(net, s, 1e-5);
      ASSERT_EQ(analytic.size(), numeric.size());
      for (std::size_t p = 0; p < analytic.size(); ++p) {
        if (std::abs(analytic[p]) > 1e-8) {
          EXPECT_LT(std::abs(analytic[p] - numeric[p]) / std::abs(analytic[p]), 1e-5) << "param " << p;
        }
      }
    }
  }
}

TEST(BackpropStep, AppliesExactlyOneGradientStep) {
  Rng rng(3);
  Mlp net = init_mlp({{5, 4, 1}, 0.5, 8});
  const Sample s = random_sample(rng, 5);
  const Gradient g = gradient(net, s);
  const Mlp before = net;
  const double err = backprop_step(net, s, 0.3);
  EXPECT_DOUBLE_EQ(err, g.error);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (std::size_t k = 0; k < net.layers()[l].weights.size(); ++k) {
      EXPECT_NEAR(net.layers()[l].weights[k], before.layers()[l].weights[k] - 0.3 * g.layers[l].weights[k], 1e-15);
    }
    for (std::size_t k = 0; k < net.layers()[l].bias.size(); ++k) {
      EXPECT_NEAR(net.layers()[l].bias[k], before.layers()[l].bias[k] - 0.3 * g.layers[l].bias[k], 1e-15);
    }
  }
}

TEST(BackpropStep, ExactFitLeavesWeightsUnchanged) {
  Mlp net = init_mlp({{3, 4, 1}, 0.5, 4});
  Sample s{{0.1, 0.2, 0.3}, 0.0};
  s.target = predict(net, s.input);
  const Mlp before = net;
  EXPECT_EQ(backprop_step(net, s, 0.5), 0.0);
  EXPECT_EQ(net, before);
}

TEST(BackpropStep, RepeatedStepsFitOneSample) {
  Rng rng(17);
  Mlp net = init_mlp({{14, 25, 1}, 0.5, 18});
  const Sample s = random_sample(rng, 14);
  double err = 1.0;
  for (int k = 0; k < 200; ++k) {
    err = backprop_step(net, s, 0.5);
  }
  EXPECT_LT(err, 1e-3);
}

TEST(BackpropStep, ContractionHoldsForManyRandomSamples) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Mlp net = init_mlp({{6, 8, 1}, 0.5, rng.next_u64()});
    Sample s = random_sample(rng, 6);
    s.target = 0.02 + 0.96 * s.target;
    int steps = 0;
    while (std::abs(predict(net, s.input) - s.target) >= 1e-2 && steps < 10000) {
      backprop_step(net, s, 0.5);
      ++steps;
    }
    EXPECT_LT(std::abs(predict(net, s.input) - s.target), 1e-2) << "trial " << trial;
  }
}

TEST(BackpropStep, RejectsBadArguments) {
  Mlp net = init_mlp({{2, 2, 1}, 0.5, 1});
  EXPECT_THROW(backprop_step(net, {{0.1, 0.2}, 0.5}, 0.0), ContractError);
  EXPECT_THROW(backprop_step(net, {{0.1, 0.2}, 1.5}, 0.1), ContractError);
  EXPECT_THROW(backprop_step(net, {{0.1}, 0.5}, 0.1), ContractError);
}

TEST(BackpropStep, NonFiniteInputAbortsWithNumericalError) {
  Mlp net = init_mlp({{2, 2, 1}, 0.5, 1});
  EXPECT_THROW(backprop_step(net, {{std::nan(""), 0.2}, 0.5}, 0.1), NumericalError);
}

TEST(BackpropStep, SameInputsGiveBitIdenticalWeights) {
  auto run = [] {
    Mlp net = init_mlp({{4, 6, 1}, 0.5, 42});
    Rng rng(43);
    const LearningSchedule sched{0.5, 0.05, 100.0};
    for (std::uint64_t t = 0; t < 2000; ++t) {
      backprop_step(net, random_sample(rng, 4), lr_at(sched, t));
    }
    return net;
  };
  EXPECT_EQ(run(), run());
}

TEST(LearningSchedule, FormulaAndFloor) {
  const LearningSchedule s{0.4, 0.01, 1000.0};
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 0.4);
  EXPECT_DOUBLE_EQ(lr_at(s, 1000), 0.2);
  EXPECT_DOUBLE_EQ(lr_at(s, 1'000'000'000'000ULL), 0.01);
}

TEST(LearningSchedule, NonincreasingAndBounded) {
  const LearningSchedule s{0.5, 0.05, 250.0};
  double prev = lr_at(s, 0);
  for (std::uint64_t t = 1; t < 100000; t += 7) {
    const double cur = lr_at(s, t);
    ASSERT_LE(cur, prev);
    ASSERT_GE(cur, s.eta_min);
    prev = cur;
  }
}

TEST(LearningSchedule, Validation) {
  EXPECT_THROW((LearningSchedule{0.1, 0.2, 10.0}.validate()), ConfigError);
  EXPECT_THROW((LearningSchedule{0.1, 0.0, 10.0}.validate()), ConfigError);
  EXPECT_THROW((LearningSchedule{0.1, 0.01, 0.0}.validate()), ConfigError);
  EXPECT_NO_THROW((LearningSchedule{0.1, 0.1, 10.0}.validate()));
}

TEST(ModelFile, RoundTripIsBitExact) {
  Mlp net = init_mlp({{14, 25, 1}, 0.5, 3});
  Rng rng(4);
  for (int k = 0; k < 500; ++k) {
    backprop_step(net, random_sample(rng, 14), 0.3);
  }
  std::stringstream buf;
  save_mlp(net, buf);
  const Mlp back = load_mlp(buf);
  EXPECT_EQ(back, net);
  for (int k = 0; k < 50; ++k) {
    const auto probe = random_sample(rng, 14).input;
    EXPECT_EQ(predict(back, probe), predict(net, probe));
  }
}

TEST(ModelFile, HeaderListsLayerSizes) {
  std::stringstream buf;
  save_mlp(init_mlp({{2, 3, 1}, 0.0, 0}), buf);
  std::string header;
  std::getline(buf, header);
  EXPECT_EQ(header, "mlp 2 3 1");
  std::string line;
  int rows = 0;
  while (std::getline(buf, line)) {
    ++rows;
  }
  EXPECT_EQ(rows, 2 + 1 + 3 + 1);
}

TEST(ModelFile, TruncatedFileIsRejected) {
  std::stringstream buf;
  save_mlp(init_mlp({{14, 25, 1}, 0.5, 3}), buf);
  const std::string full = buf.str();
  std::istringstream cut(full.substr(0, full.size() / 2));
  EXPECT_THROW(load_mlp(cut), FormatError);
  std::istringstream empty("");
  EXPECT_THROW(load_mlp(empty), FormatError);
}

TEST(ModelFile, ShortWeightRowIsADimensionError) {
  std::stringstream buf;
  save_mlp(init_mlp({{14, 25, 1}, 0.5, 3}), buf);
  std::string header;
  std::string first_row;
  std::getline(buf, header);
  std::getline(buf, first_row);
  // Drop one of the 25 values on the first weight row.
  first_row = first_row.substr(0, first_row.rfind(' '));
  std::string rest((std::istreambuf_iterator<char>(buf)), std::istreambuf_iterator<char>());
  std::istringstream bad(header + "\n" + first_row + "\n" + rest);
  try {
    load_mlp(bad);
    FAIL() << "expected a FormatError";
  } catch (const FormatError &e) {
    EXPECT_NE(std::string(e.what()).find("dimension"), std::string::npos);
  }
}

TEST(ModelFile, GarbageIsRejected) {
  std::istringstream notmlp("net 1 1\n0\n0\n");
  EXPECT_THROW(load_mlp(notmlp), FormatError);
  std::istringstream badnum("mlp 1 1\nabc\n0\n");
  EXPECT_THROW(load_mlp(badnum), FormatError);
  std::istringstream badsize("mlp 1 0\n");
  EXPECT_THROW(load_mlp(badsize), FormatError);
}

TEST(Concurrency, ForwardIsSafeFromManyThreads) {
  const Mlp net = init_mlp({{14, 25, 1}, 0.5, 3});
  std::vector<double> probe(14, 0.25);
  const double expected = predict(net, probe);
  std::vector<std::thread> threads;
  std::vector<int> ok(4, 0);
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      int good = 1;
      for (int k = 0; k < 2000; ++k) {
        good &= predict(net, probe) == expected ? 1 : 0;
      }
      ok[static_cast<std::size_t>(t)] = good;
    });
  }
  for (auto &th : threads) {
    th.join();
  }
  for (int v : ok) {
    EXPECT_EQ(v, 1);
  }
}
