// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rrd/losses.hpp"
#include "rrd/memory_bank.hpp"
#include "rrd/rng.hpp"
#include "rrd/tensor.hpp"

using namespace rrd;

namespace {

Tensor random_unit_rows(int64_t n, int64_t dim, Rng& rng, bool requires_grad = false) {
  std::vector<double> v(static_cast<size_t>(n * dim));
  for (int64_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int64_t j = 0; j < dim; ++j) {
      const double x = rng.next_gaussian();
      v[i * dim + j] = x;
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-8) norm = 1.0;
    for (int64_t j = 0; j < dim; ++j) v[i * dim + j] /= norm;
  }
  return Tensor::from_data({n, dim}, std::move(v), requires_grad);
}

// Scalar-loop softmax for the oracles below.
std::vector<double> softmax_vec(std::vector<double> x, double tau) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double z = 0.0;
  for (double& v : x) {
    v = std::exp((v - mx) / tau);
    z += v;
  }
  for (double& v : x) v /= z;
  return x;
}

}  // namespace

TEST_CASE("loss weights validation") {
  LossWeights ok;
  CHECK_NOTHROW(ok.validate());
  LossWeights bad = ok;
  bad.lambda_kd = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.tau_student = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.tau_teacher = -2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.tau_kd = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.beta_rrd = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("relational loss pins the frozen two-point oracle in both modes") {
  // Student [1,0], teacher [0,1], bank rows {[1,0], [0,1]}, tau_student 0.5,
  // tau_teacher 0.25. Values computed with an independent scalar
  // implementation. The loss reads the bank as handed in; updating it around
  // the loss is the trainer's job, so both modes leave the contents alone.
  const Tensor student = Tensor::from_data({1, 2}, {1.0, 0.0});
  const Tensor teacher = Tensor::from_data({1, 2}, {0.0, 1.0});
  MemoryBank bank = MemoryBank::from_storage(2, 2, BankStrategy::kFifo, 0.999,
                                             {1.0, 0.0, 0.0, 1.0}, 0);

  Tensor plain = rrd_loss(student, teacher, bank, 0.5, 0.25, RrdMode::kEnqueueFirst);
  CHECK(plain.value() == doctest::Approx(2.0909555911187896).epsilon(1e-12));

  Tensor appended = rrd_loss(student, teacher, bank, 0.5, 0.25, RrdMode::kAppend);
  CHECK(appended.value() == doctest::Approx(2.221395336533257).epsilon(1e-12));

  CHECK(bank.cursor() == 0);
  CHECK(bank.storage() == std::vector<double>{1.0, 0.0, 0.0, 1.0});
}

TEST_CASE("relational loss matches a scalar-loop oracle on random instances") {
  Rng rng(8001);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(4));
    const int64_t dim = 2 + static_cast<int64_t>(rng.next_below(6));
    const int64_t capacity = std::max<int64_t>(n, 2 + static_cast<int64_t>(rng.next_below(12)));
    const double tau_s = 0.2 + rng.next_double();
    const double tau_t = 0.1 + rng.next_double();
    const RrdMode mode = trial % 2 == 0 ? RrdMode::kEnqueueFirst : RrdMode::kAppend;

    Tensor student = random_unit_rows(n, dim, rng);
    Tensor teacher = random_unit_rows(n, dim, rng);
    MemoryBank bank(capacity, dim, BankStrategy::kFifo, 9000 + trial);
    // The loss reads whatever the bank holds; enqueue_first differs from
    // append only in whether the own-teacher column is appended.
    const std::vector<double> rows = bank.storage();

    double expect = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const int64_t cols = mode == RrdMode::kAppend ? capacity + 1 : capacity;
      std::vector<double> st(cols), te(cols);
      for (int64_t k = 0; k < capacity; ++k) {
        double ds = 0.0, dt = 0.0;
        for (int64_t j = 0; j < dim; ++j) {
          ds += student.at(i, j) * rows[k * dim + j];
          dt += teacher.at(i, j) * rows[k * dim + j];
        }
        st[k] = ds;
        te[k] = dt;
      }
      if (mode == RrdMode::kAppend) {
        double ds = 0.0;
        for (int64_t j = 0; j < dim; ++j) ds += student.at(i, j) * teacher.at(i, j);
        st[capacity] = ds;
        te[capacity] = 1.0;  // teacher row against itself, unit norm
      }
      const auto ps = softmax_vec(st, tau_s);
      const auto pt = softmax_vec(te, tau_t);
      for (int64_t k = 0; k < cols; ++k) expect -= pt[k] * std::log(ps[k]);
    }
    expect /= static_cast<double>(n);

    Tensor loss = rrd_loss(student, teacher, bank, tau_s, tau_t, mode);
    CHECK(loss.value() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("relational loss propagates to the student but never the teacher") {
  Rng rng(8002);
  for (const RrdMode mode : {RrdMode::kEnqueueFirst, RrdMode::kAppend}) {
    Tensor student = random_unit_rows(3, 4, rng, true);
    Tensor teacher = random_unit_rows(3, 4, rng, true);
    MemoryBank bank(6, 4, BankStrategy::kFifo, 21);
    Tensor loss = rrd_loss(student, teacher, bank, 0.5, 0.2, mode);
    loss.backward();
    CHECK(student.has_grad());
    bool student_nonzero = false;
    for (double g : student.grad()) {
      if (g != 0.0) student_nonzero = true;
    }
    CHECK(student_nonzero);
    // Stop-gradient on the relation targets.
    CHECK_FALSE(teacher.has_grad());
  }
}

TEST_CASE("relational loss is bounded below by the teacher entropy") {
  // Cross-entropy H(p, q) >= H(p), with equality only at q = p.
  Rng rng(8003);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(3));
    Tensor student = random_unit_rows(n, 5, rng);
    Tensor teacher = random_unit_rows(n, 5, rng);
    MemoryBank bank(8, 5, BankStrategy::kFifo, 300 + trial);
    const double tau_s = 0.3, tau_t = 0.15;

    Tensor loss = rrd_loss(student, teacher, bank, tau_s, tau_t, RrdMode::kAppend);
    Tensor targets = similarity_distribution(
        bank.extended_similarities(teacher, teacher), tau_t);
    const auto ent = row_entropy(targets);
    double mean_entropy = 0.0;
    for (double e : ent) mean_entropy += e;
    mean_entropy /= static_cast<double>(ent.size());
    CHECK(loss.value() >= mean_entropy - 1e-12);
  }
}

TEST_CASE("infonce pins the frozen oracle and matches the scalar loop") {
  // Student == teacher == e1, bank holds the single row e2, tau 1:
  // -log(exp(1) / (exp(0) + exp(1))) computed independently.
  {
    Tensor e1 = Tensor::from_data({1, 2}, {1.0, 0.0});
    MemoryBank bank = MemoryBank::from_storage(1, 2, BankStrategy::kFifo, 0.999,
                                               {0.0, 1.0}, 0);
    Tensor loss = infonce_loss(e1, e1, bank, 1.0);
    CHECK(loss.value() == doctest::Approx(0.31326168751822286).epsilon(1e-12));
  }

  Rng rng(8004);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(4));
    const int64_t dim = 2 + static_cast<int64_t>(rng.next_below(6));
    const int64_t capacity = 2 + static_cast<int64_t>(rng.next_below(12));
    const double tau = 0.2 + rng.next_double();
    Tensor student = random_unit_rows(n, dim, rng);
    Tensor teacher = random_unit_rows(n, dim, rng);
    MemoryBank bank(capacity, dim, BankStrategy::kFifo, 4000 + trial);
    const auto& rows = bank.storage();

    double expect = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      std::vector<double> sims(capacity + 1);
      for (int64_t k = 0; k < capacity; ++k) {
        double d = 0.0;
        for (int64_t j = 0; j < dim; ++j) d += student.at(i, j) * rows[k * dim + j];
        sims[k] = d;
      }
      double pos = 0.0;
      for (int64_t j = 0; j < dim; ++j) pos += student.at(i, j) * teacher.at(i, j);
      sims[capacity] = pos;
      const auto p = softmax_vec(sims, tau);
      expect -= std::log(p[capacity]);
    }
    expect /= static_cast<double>(n);

    Tensor loss = infonce_loss(student, teacher, bank, tau);
    CHECK(loss.value() == doctest::Approx(expect).epsilon(1e-12));
    // The bank is never updated inside the loss.
    CHECK(bank.storage() == rows);
  }
}

TEST_CASE("infonce stop-gradient mirrors the relational loss") {
  Rng rng(8005);
  Tensor student = random_unit_rows(2, 3, rng, true);
  Tensor teacher = random_unit_rows(2, 3, rng, true);
  MemoryBank bank(4, 3, BankStrategy::kFifo, 50);
  Tensor loss = infonce_loss(student, teacher, bank, 0.4);
  loss.backward();
  CHECK(student.has_grad());
  CHECK_FALSE(teacher.has_grad());
}

TEST_CASE("relational append mode converges to infonce as tau_teacher vanishes") {
  // With a near-zero teacher temperature and all bank similarities bounded
  // away from 1, the teacher distribution collapses onto the appended own
  // feature column and the cross-entropy reduces to the contrastive loss.
  Rng rng(8006);
  int accepted = 0;
  while (accepted < 50) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(4));
    const int64_t dim = 4 + static_cast<int64_t>(rng.next_below(5));
    const int64_t capacity = 2 + static_cast<int64_t>(rng.next_below(10));
    Tensor student = random_unit_rows(n, dim, rng);
    Tensor teacher = random_unit_rows(n, dim, rng);
    MemoryBank bank(capacity, dim, BankStrategy::kFifo, 6000 + accepted);

    // Reject draws where a bank row nearly coincides with a teacher feature.
    Tensor tsims = bank.similarities(teacher);
    bool ok = true;
    for (double v : tsims.data()) {
      if (v >= 0.99) ok = false;
    }
    if (!ok) continue;
    ++accepted;

    const double tau = 0.35;
    Tensor a = rrd_loss(student, teacher, bank, tau, 1e-4, RrdMode::kAppend);
    Tensor b = infonce_loss(student, teacher, bank, tau);
    CHECK(std::fabs(a.value() - b.value()) < 1e-3);
  }
}

TEST_CASE("kd loss pins the frozen hand values") {
  Tensor s = Tensor::from_data({1, 2}, {1.0, 0.0});
  Tensor t = Tensor::from_data({1, 2}, {0.0, 1.0});
  CHECK(kd_kl_loss(s, t, 1.0).value() == doctest::Approx(0.46211715726000974).epsilon(1e-9));
  CHECK(kd_kl_loss(s, t, 2.0).value() == doctest::Approx(0.48983732480741826).epsilon(1e-9));
}

TEST_CASE("kd loss of identical logits is exactly zero") {
  Rng rng(8007);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(12);
    for (double& x : v) x = 5.0 * rng.next_gaussian();
    Tensor s = Tensor::from_data({3, 4}, v, true);
    Tensor t = Tensor::from_data({3, 4}, v);
    Tensor loss = kd_kl_loss(s, t, 4.0);
    CHECK(loss.value() == 0.0);
  }
}

TEST_CASE("kd loss matches a scalar KL oracle and respects stop-gradient") {
  Rng rng(8008);
  for (int trial = 0; trial < 30; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(4));
    const int64_t c = 2 + static_cast<int64_t>(rng.next_below(6));
    const double tau = 0.5 + 3.0 * rng.next_double();
    std::vector<double> sv(n * c), tv(n * c);
    for (double& x : sv) x = 2.0 * rng.next_gaussian();
    for (double& x : tv) x = 2.0 * rng.next_gaussian();
    Tensor s = Tensor::from_data({n, c}, sv, true);
    Tensor t = Tensor::from_data({n, c}, tv, true);

    double expect = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      std::vector<double> srow(sv.begin() + i * c, sv.begin() + (i + 1) * c);
      std::vector<double> trow(tv.begin() + i * c, tv.begin() + (i + 1) * c);
      const auto ps = softmax_vec(srow, tau);
      const auto pt = softmax_vec(trow, tau);
      for (int64_t j = 0; j < c; ++j) expect += pt[j] * (std::log(pt[j]) - std::log(ps[j]));
    }
    expect *= tau * tau / static_cast<double>(n);

    Tensor loss = kd_kl_loss(s, t, tau);
    CHECK(loss.value() == doctest::Approx(expect).epsilon(1e-10));
    loss.backward();
    CHECK(s.has_grad());
    CHECK_FALSE(t.has_grad());
  }
}

TEST_CASE("cross entropy oracles and label validation") {
  // Confident correct prediction: loss ~ exp(-20).
  Tensor easy = Tensor::from_data({1, 2}, {10.0, -10.0});
  CHECK(cross_entropy_loss(easy, {0}).value() ==
        doctest::Approx(2.0611536900435727e-09).epsilon(1e-9));

  // Uniform logits: loss = ln(num_classes) exactly, any label.
  Tensor uniform = Tensor::zeros({2, 5});
  CHECK(cross_entropy_loss(uniform, {3, 0}).value() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));

  Rng rng(8009);
  for (int trial = 0; trial < 30; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(5));
    const int64_t c = 2 + static_cast<int64_t>(rng.next_below(6));
    std::vector<double> v(n * c);
    for (double& x : v) x = 3.0 * rng.next_gaussian();
    std::vector<int> labels(n);
    for (int64_t i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.next_below(c));

    double expect = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      std::vector<double> row(v.begin() + i * c, v.begin() + (i + 1) * c);
      const auto p = softmax_vec(row, 1.0);
      expect -= std::log(p[labels[i]]);
    }
    expect /= static_cast<double>(n);
    Tensor logits = Tensor::from_data({n, c}, v);
    CHECK(cross_entropy_loss(logits, labels).value() ==
          doctest::Approx(expect).epsilon(1e-12));
  }

  Tensor logits = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(cross_entropy_loss(logits, {0}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy_loss(logits, {0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy_loss(logits, {0, -1}), std::invalid_argument);
}

TEST_CASE("combined objective weights its terms") {
  Tensor sup = Tensor::scalar(1.0);
  Tensor kd = Tensor::scalar(2.0);
  Tensor rrd = Tensor::scalar(3.0);
  CHECK(combined_objective(sup, kd, rrd, 0.9, 1.5).value() ==
        doctest::Approx(1.0 + 0.9 * 2.0 + 1.5 * 3.0).epsilon(1e-14));
  CHECK(combined_objective(sup, kd, rrd, 0.0, 0.0).value() == 1.0);
  CHECK_THROWS_AS(combined_objective(sup, kd, rrd, -0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(combined_objective(sup, kd, rrd, 0.1, -1.0), std::invalid_argument);
}

TEST_CASE("row statistics: KL equals cross entropy minus entropy") {
  Rng rng(8010);
  for (int trial = 0; trial < 30; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.next_below(4));
    const int64_t c = 2 + static_cast<int64_t>(rng.next_below(8));
    std::vector<double> pv(n * c), qv(n * c);
    for (int64_t i = 0; i < n; ++i) {
      double ps = 0.0, qs = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        pv[i * c + j] = 0.05 + rng.next_double();
        qv[i * c + j] = 0.05 + rng.next_double();
        ps += pv[i * c + j];
        qs += qv[i * c + j];
      }
      for (int64_t j = 0; j < c; ++j) {
        pv[i * c + j] /= ps;
        qv[i * c + j] /= qs;
      }
    }
    Tensor p = Tensor::from_data({n, c}, pv);
    Tensor q = Tensor::from_data({n, c}, qv);
    const auto h = row_entropy(p);
    const auto ce = row_cross_entropy(p, q);
    const auto kl = row_kl_divergence(p, q);
    REQUIRE(h.size() == static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      CHECK(kl[i] == doctest::Approx(ce[i] - h[i]).epsilon(1e-10));
      CHECK(kl[i] >= -1e-12);
    }
    // KL(p, p) is exactly zero up to rounding.
    const auto self_kl = row_kl_divergence(p, p);
    for (double v : self_kl) CHECK(std::fabs(v) < 1e-13);
  }

  // Zero entries contribute zero to the entropy terms.
  Tensor p = Tensor::from_data({1, 3}, {0.5, 0.5, 0.0});
  const auto h = row_entropy(p);
  CHECK(h[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}
