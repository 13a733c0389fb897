// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "grad_check.hpp"
#include "tissueseg/augmentation.hpp"
#include "tissueseg/dataset.hpp"
#include "tissueseg/errors.hpp"
#include "tissueseg/gan_baseline.hpp"
#include "tissueseg/losses.hpp"
#include "tissueseg/metrics.hpp"
#include "tissueseg/mit_encoder.hpp"
#include "tissueseg/pscse_decoder.hpp"
#include "tissueseg/runtime.hpp"
#include "tissueseg/synthetic.hpp"
#include "tissueseg/tensors.hpp"
#include "tissueseg/trainer.hpp"

using namespace tissueseg;
namespace fs = std::filesystem;

namespace {

constexpr auto kD = torch::kDouble;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << what;
      pass = false;
    }
  }
};

// ---- 1 -------------------------------------------------------------------

Verdict metric_identity() {
  Verdict v;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> d(0, 100000);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto tp = d(rng), fp = d(rng), fn = d(rng);
    if (tp + fp + fn == 0) continue;
    const auto m = metrics_from_counts(tp, fp, fn);
    worst = std::max(worst, std::abs(m.dsc - 2 * m.iou / (1 + m.iou)));
  }
  v.require(worst < 1e-12, "identity residual " + std::to_string(worst));
  // IoU in basis points → counts with exactly that IoU
  const std::pair<std::uint64_t, double> reference[] = {
      {7375, 84.89}, {7799, 87.64}, {5268, 69.01}, {8689, 92.99}};
  for (auto [iou_bp, dsc_pct] : reference) {
    const auto m = metrics_from_counts(iou_bp, (10000 - iou_bp) / 2, 10000 - iou_bp - (10000 - iou_bp) / 2);
    const double got = 100 * m.dsc;
    v.require(std::abs(got - dsc_pct) <= 0.01,
              "IoU " + std::to_string(iou_bp / 100.0) + " gives DSC " + std::to_string(got));
  }
  if (v.pass) v.detail << "max residual " << worst << ", 4/4 reference pairs within 0.01 pp";
  return v;
}

// ---- 2 -------------------------------------------------------------------

Verdict metric_oracle() {
  Verdict v;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> lab(0, 3);
  std::bernoulli_distribution agree(0.6);
  for (int trial = 0; trial < 100 && v.pass; ++trial) {
    TissueMask pred(16, 16), gt(16, 16);
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        const auto g = static_cast<std::uint8_t>(lab(rng));
        gt.set(r, c, g);
        pred.set(r, c, agree(rng) ? g : static_cast<std::uint8_t>(lab(rng)));
      }
    }
    const auto counts = confusion_counts(pred, gt);
    const auto metrics = metrics_from_counts(counts);
    for (int k = 0; k < 4; ++k) {
      std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
          const bool p = pred.at(r, c) == k, g = gt.at(r, c) == k;
          tp += p && g;
          fp += p && !g;
          fn += !p && g;
          tn += !p && !g;
        }
      }
      v.require(counts.tp[k] == tp && counts.fp[k] == fp && counts.fn[k] == fn && counts.tn[k] == tn,
                "counts differ in trial " + std::to_string(trial));
      const auto& m = metrics[static_cast<std::size_t>(k)];
      if (tp + fp + fn == 0) {
        v.require(m.dsc == 1.0 && m.iou == 1.0, "absent class convention");
        continue;
      }
      auto div = [](std::uint64_t a, std::uint64_t b) {
        return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
      };
      v.require(m.precision == div(tp, tp + fp) && m.recall == div(tp, tp + fn) &&
                    m.dsc == div(2 * tp, 2 * tp + fp + fn) && m.iou == div(tp, tp + fp + fn),
                "metrics differ in trial " + std::to_string(trial));
    }
  }
  if (v.pass) v.detail << "100 pairs, counts and metrics bit-identical";
  return v;
}

// ---- 3 -------------------------------------------------------------------

Verdict gradient_suite() {
  Verdict v;
  torch::manual_seed(3);
  auto logits = torch::randn({2, 4, 6, 6}, kD).requires_grad_(true);
  auto targets = tissueseg::one_hot(torch::randint(0, 4, {2, 6, 6}, torch::kLong), 4, kD);
  auto probs = [&] { return torch::softmax(logits, 1); };
  LossConfig cfg;
  double worst = 0;
  auto check = [&](const std::string& name, const std::function<torch::Tensor()>& f, torch::Tensor x,
                   double h) {
    const auto rep = testutil::compare_gradients(f, x, h, 1e-3);
    worst = std::max(worst, rep.max_rel);
    v.require(rep.max_rel < 1e-4, name + " rel err " + std::to_string(rep.max_rel));
  };
  check("dice", [&] { return dice_loss(probs(), targets, cfg.dice_smooth); }, logits, 1e-5);
  check("focal", [&] { return focal_loss(probs(), targets, 2.0, 0.25); }, logits, 1e-5);
  check("dce", [&] { return dynamic_cross_entropy(probs(), targets); }, logits, 1e-5);
  check("L_sl", [&] { return supervised_loss(probs(), targets, cfg); }, logits, 1e-5);
  check("L_ssl", [&] { return semi_supervised_loss(probs(), targets, cfg); }, logits, 1e-5);

  auto conf_logits = torch::randn({2, 1, 6, 6}, kD).requires_grad_(true);
  auto real_logits = torch::randn({2, 1, 6, 6}, kD).requires_grad_(true);
  auto conf = [&] { return torch::sigmoid(conf_logits); };
  const auto fixed_conf = torch::rand({2, 1, 6, 6}, kD);
  const auto pseudo = pseudo_targets_from_probs(probs().detach());
  check("adversarial", [&] { return adversarial_loss(conf()); }, conf_logits, 1e-6);
  check("discriminator/real",
        [&] { return discriminator_loss(torch::sigmoid(real_logits), conf().detach()); }, real_logits,
        1e-6);
  check("discriminator/fake",
        [&] { return discriminator_loss(torch::sigmoid(real_logits).detach(), conf()); }, conf_logits,
        1e-6);
  check("masked_semi_ce", [&] { return masked_semi_ce(probs(), pseudo, fixed_conf, 0.2); }, logits,
        1e-6);
  check("gan_supervised_total",
        [&] {
          return gan_supervised_total(cross_entropy(probs(), targets), adversarial_loss(conf()), 0.01);
        },
        logits, 1e-6);
  check("gan_semi_total",
        [&] {
          return gan_semi_total(masked_semi_ce(probs(), pseudo, fixed_conf, 0.2),
                                adversarial_loss(conf()), 0.1);
        },
        conf_logits, 1e-6);
  if (v.pass) v.detail << "11 losses, worst relative error " << worst;
  return v;
}

// ---- 4 -------------------------------------------------------------------

Verdict loss_limits() {
  Verdict v;
  torch::manual_seed(4);
  const double eps = LossConfig{}.dice_smooth;
  auto labels = torch::randint(0, 4, {2, 32, 32}, torch::kLong);
  auto y = tissueseg::one_hot(labels, 4, kD);
  auto wrong = tissueseg::one_hot((labels + 1) % 4, 4, kD);
  const double dl_perfect = dice_loss(y, y, eps).item<double>();
  const double fl_perfect = focal_loss(y, y, 2.0, 0.25).item<double>();
  const double dce_perfect = dynamic_cross_entropy(y, y).item<double>();
  const double dl_disjoint = dice_loss(wrong, y, eps).item<double>();
  v.require(dl_perfect <= 2 * eps, "perfect dice " + std::to_string(dl_perfect));
  v.require(fl_perfect <= 1e-6, "perfect focal " + std::to_string(fl_perfect));
  v.require(dce_perfect <= 1e-5, "perfect dce " + std::to_string(dce_perfect));
  v.require(dl_disjoint >= 1 - 2 * eps, "disjoint dice " + std::to_string(dl_disjoint));
  // the ε_d bounds above are loose for ε_d = 1; also hold the tight ones
  v.require(dl_perfect < 1e-12 && dl_disjoint > 0.99, "tight dice limits");
  auto p = torch::softmax(torch::randn({2, 4, 8, 8}, kD), 1);
  auto t = tissueseg::one_hot(torch::randint(0, 4, {2, 8, 8}, torch::kLong), 4, kD);
  const double diff = std::abs(focal_loss(p, t, 0.0, 1.0).item<double>() -
                               cross_entropy(p, t).item<double>());
  v.require(diff <= 1e-10, "focal(0,1) vs CE " + std::to_string(diff));
  if (v.pass) {
    v.detail << "DL " << dl_perfect + 0.0 << "/" << dl_disjoint << ", FL " << fl_perfect + 0.0 << ", DCE "
             << dce_perfect + 0.0 << ", |FL-CE| " << diff;
  }
  return v;
}

// ---- 5 -------------------------------------------------------------------

Verdict shape_pyramid() {
  Verdict v;
  torch::manual_seed(5);
  torch::NoGradGuard guard;
  auto x = torch::randn({1, 3, 256, 256});
  MitEncoder enc(MitConfig::b3());
  enc->eval();
  auto f = enc->forward(x);
  const std::int64_t dims[] = {64, 128, 320, 512};
  const std::int64_t sides[] = {64, 32, 16, 8};
  for (int s = 0; s < 4; ++s) {
    v.require(f[s].sizes() == torch::IntArrayRef({1, dims[s], sides[s], sides[s]}),
              "stage " + std::to_string(s + 1) + " shape");
  }
  HybridSegmenter model(ModelConfig::b3());
  model->eval();
  auto logits = model->forward(torch::randn({2, 3, 256, 256}));
  v.require(logits.sizes() == torch::IntArrayRef({2, 4, 256, 256}), "logit shape");
  const double dev = (torch::softmax(logits, 1).sum(1) - 1).abs().max().item<double>();
  v.require(dev <= 1e-6, "softmax sum deviation " + std::to_string(dev));
  if (v.pass) v.detail << "pyramid 64/32/16/8 x 64/128/320/512, logits [2,4,256,256], |Σp-1| " << dev;
  return v;
}

// ---- 6 -------------------------------------------------------------------

Verdict pscse_contract() {
  Verdict v;
  torch::manual_seed(6);
  torch::NoGradGuard guard;
  const auto threshold = ModelConfig::b3().maxout_threshold;
  for (std::int64_t ch : {8, 16, 31}) {
    ParallelScSe p(ch, SeMode::pscse, threshold);
    auto x = torch::randn({2, ch, 5, 5});
    v.require(torch::equal(p->forward(x), p->scse(x)), "below threshold C=" + std::to_string(ch));
  }
  double worst = 0;
  for (std::int64_t ch : {32, 64, 128}) {
    ParallelScSe p(ch, SeMode::pscse, threshold);
    auto x = torch::randn({2, ch, 5, 5});
    auto c = p->cse(x);
    auto s = p->sse(x);
    const double err = (p->forward(x) - (c + s + torch::maximum(c, s))).abs().max().item<double>();
    worst = std::max(worst, err);
    v.require(err <= 1e-6, "above threshold C=" + std::to_string(ch));
  }
  for (auto mode : {SeMode::scse, SeMode::pscse}) {
    for (std::int64_t ch : {16, 64}) {
      ParallelScSe p(ch, mode, threshold);
      auto z = torch::zeros({1, ch, 4, 4});
      v.require(torch::equal(p->forward(z), z), std::string("zero input, ") + se_mode_name(mode));
    }
  }
  ChannelSe cse(16);
  SpatialSe sse(16);
  auto z = torch::zeros({1, 16, 4, 4});
  v.require(torch::equal(cse->forward(z), z) && torch::equal(sse->forward(z), z), "zero input, cse/sse");
  DecoderStage none(DecoderStageOptions{8, 8, 8, SeMode::none, threshold, false});
  v.require(!none->has_attention(), "mode none has no gate");
  if (v.pass) v.detail << "switch at C=" << threshold << ", max-out residual " << worst;
  return v;
}

// ---- 7 -------------------------------------------------------------------

class StubBackend : public SelfTrainingBackend {
 public:
  explicit StubBackend(std::function<double(int, int)> loss) : loss_(std::move(loss)) {}
  std::map<std::string, TissueMask> pseudo_label(const std::vector<RgbImage>& images) override {
    std::map<std::string, TissueMask> out;
    for (const auto& img : images) out.emplace(img.name(), TissueMask(img.height(), img.width()));
    return out;
  }
  void begin_round(int) override {}
  double train_run(const std::vector<LabeledSample>& set, int round, int run) override {
    sizes.push_back(static_cast<int>(set.size()));
    return loss_(round, run);
  }
  void adopt_run(int run) override { adopted.push_back(run); }

  std::vector<int> sizes;
  std::vector<int> adopted;

 private:
  std::function<double(int, int)> loss_;
};

DatasetPools stub_pools(int labeled, int unlabeled) {
  DatasetPools p;
  char name[32];
  for (int i = 0; i < labeled; ++i) {
    std::snprintf(name, sizeof name, "lab%04d", i);
    p.labeled.push_back({RgbImage(2, 2, name), TissueMask(2, 2)});
  }
  for (int i = 0; i < unlabeled; ++i) {
    std::snprintf(name, sizeof name, "unl%04d", i);
    p.unlabeled.emplace_back(2, 2, name);
  }
  return p;
}

Verdict ssl_bookkeeping() {
  Verdict v;
  const std::map<int, std::vector<int>> table{{25, {103, 128, 153, 178}}, {50, {128, 178, 228, 278}}};
  for (const auto& [n, sizes] : table) {
    auto pools = stub_pools(78, 600);
    StubBackend b([](int round, int run) { return 1.0 / round + 0.01 * run; });
    auto out = train_semi_supervised(pools, SslConfig{4, 5, n}, b, 11);
    std::vector<int> got;
    for (const auto& r : out.runs)
      if (r.run == 1) got.push_back(r.training_size);
    v.require(got == sizes, "sizes for n=" + std::to_string(n));
    for (std::size_t i = 0; i < b.sizes.size(); ++i)
      v.require(b.sizes[i] == sizes[i / 5], "run sizes within a round, n=" + std::to_string(n));
    v.require(static_cast<int>(pools.labeled.size()) == 78 + 4 * n, "final |L|");
  }
  // argmin transfer
  {
    auto pools = stub_pools(10, 60);
    const std::vector<double> vl{0.7, 0.4, 0.3, 0.9, 0.3};
    StubBackend b([&](int, int run) { return vl[static_cast<std::size_t>(run)]; });
    auto out = train_semi_supervised(pools, SslConfig{1, 5, 8}, b, 5);
    v.require(out.rounds.at(0).best_run == 3 && b.adopted == std::vector<int>{2}, "argmin run");
    std::vector<std::string> moved;
    for (std::size_t i = 10; i < pools.labeled.size(); ++i) moved.push_back(pools.labeled[i].image.name());
    std::sort(moved.begin(), moved.end());
    v.require(moved == out.runs.at(2).picked, "transferred batch is the argmin run's batch");
  }
  // termination on the first non-improving round
  {
    auto pools = stub_pools(10, 200);
    const std::vector<double> m{1.0, 0.6, 0.5, 0.55, 0.2};
    StubBackend b([&](int round, int run) { return m[static_cast<std::size_t>(round - 1)] + 0.05 * run; });
    auto out = train_semi_supervised(pools, SslConfig{10, 3, 5}, b, 5);
    // the transfer precedes the improvement test, so round 4's batch still joins L
    v.require(out.stop == SslStop::no_improvement && out.rounds.size() == 4 &&
                  !out.rounds.back().improved && b.adopted.size() == 3 && pools.labeled.size() == 30,
              "termination after round 4");
  }
  if (v.pass) v.detail << "n=25 103/128/153/178, n=50 128/178/228/278, argmin and stop ok";
  return v;
}

// ---- 8 -------------------------------------------------------------------

Verdict overfit() {
  Verdict v;
  torch::manual_seed(8);
  const auto data = synthetic_set(4, 8, SyntheticSpec{64, 64, 8, 4.0, 0.8});
  std::vector<RgbImage> imgs;
  std::vector<TissueMask> masks;
  for (const auto& s : data) {
    imgs.push_back(s.image);
    masks.push_back(s.mask);
  }
  const auto x = images_to_tensor(imgs);
  const auto y = tissueseg::one_hot(masks_to_tensor(masks), 4);
  HybridSegmenter model(ModelConfig::tiny());
  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(3e-3));
  LossConfig cfg;
  double dsc = 0;
  int epoch = 0;
  for (epoch = 1; epoch <= 200; ++epoch) {
    model->train();
    opt.zero_grad();
    auto loss = supervised_loss(torch::softmax(model->forward(x), 1), y, cfg);
    loss.backward();
    opt.step();
    if (epoch % 10 == 0) {
      dsc = evaluate(model, data, cfg, LossKind::supervised, 4).dsc;
      if (dsc >= 0.95) break;
    }
  }
  v.require(dsc >= 0.95, "train DSC " + std::to_string(dsc) + " after 200 epochs");
  if (v.pass) v.detail << "train DSC " << dsc << " at epoch " << epoch;
  return v;
}

// ---- 9 -------------------------------------------------------------------

Verdict augmentation_stats() {
  Verdict v;
  std::mt19937_64 data(9);
  std::uniform_int_distribution<int> byte(0, 255), lab(0, 3);
  auto noise = [&](int h, int w) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * w * 3);
    for (auto& p : px) p = static_cast<std::uint8_t>(byte(data));
    return RgbImage(h, w, std::move(px), "n");
  };
  auto blocks = [&](int h, int w) {
    TissueMask m(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) m.set(r, c, static_cast<std::uint8_t>((r / 4 + c / 4 + lab(data)) % 4));
    return m;
  };
  const auto pipeline = AugmentationPipeline::make_default();
  {
    const auto img = noise(8, 8);
    const auto mask = blocks(8, 8);
    std::map<std::string, int> hits;
    std::mt19937_64 rng(99);
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
      std::vector<std::string> fired;
      apply(pipeline, img, mask, rng, &fired);
      for (const auto& f : fired) ++hits[f];
    }
    double worst = 0;
    for (const auto& s : pipeline.sets()) {
      for (const auto& t : s.transforms) {
        const double sd = std::sqrt(trials * t.probability * (1 - t.probability));
        const double z = sd > 0 ? std::abs(hits[t.name] - trials * t.probability) / sd : 0;
        worst = std::max(worst, z);
        v.require(z <= 3, t.name + " fired " + std::to_string(hits[t.name]) + " times");
      }
    }
    v.detail << "worst |z| " << worst;
  }
  {
    int identical = 0;
    const auto photo = pipeline.photometric_only().with_probability(1.0);
    for (int i = 0; i < 1000; ++i) {
      const auto img = noise(16, 16);
      const auto mask = blocks(16, 16);
      std::mt19937_64 rng(static_cast<std::uint64_t>(i));
      identical += apply(photo, img, mask, rng).mask == mask ? 1 : 0;
    }
    v.require(identical == 1000, "photometric mask identity " + std::to_string(identical) + "/1000");
  }
  for (auto name : {"horizontal_flip", "vertical_flip"}) {
    const TransformSpec* spec = nullptr;
    for (const auto& s : pipeline.sets())
      for (const auto& t : s.transforms)
        if (t.name == name) spec = &t;
    v.require(spec != nullptr, std::string("missing ") + name);
    if (!spec) continue;
    for (int i = 0; i < 100; ++i) {
      const auto img = noise(13, 17);
      const auto mask = blocks(13, 17);
      std::mt19937_64 rng(static_cast<std::uint64_t>(i));
      const auto once = apply_transform(*spec, img, mask, rng);
      const auto twice = apply_transform(*spec, once.image, once.mask, rng);
      v.require(twice.image == img && twice.mask == mask, std::string(name) + " involution");
    }
  }
  if (v.pass) v.detail << ", masks 1000/1000, flips involutive";
  return v;
}

// ---- 10 ------------------------------------------------------------------

Verdict gan_limits() {
  Verdict v;
  torch::manual_seed(10);
  const auto ones = torch::ones({2, 1, 6, 6}, kD);
  const auto zeros = torch::zeros({2, 1, 6, 6}, kD);
  const double ld = discriminator_loss(ones, zeros).item<double>();
  v.require(ld <= 1e-5, "perfect discriminator " + std::to_string(ld));
  const double adv = adversarial_loss(ones).item<double>();
  v.require(adv == 0.0, "adversarial at conf 1 " + std::to_string(adv));
  const auto probs = torch::softmax(torch::randn({2, 4, 6, 6}, kD), 1);
  const auto pseudo = pseudo_targets_from_probs(probs);
  const double t = 0.2;
  const double below = masked_semi_ce(probs, pseudo, torch::full({2, 1, 6, 6}, 0.1, kD), t).item<double>();
  v.require(below == 0.0, "masked CE below threshold " + std::to_string(below));
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto conf = torch::rand({2, 1, 6, 6}, kD);
    const double got = masked_semi_ce(probs, pseudo, conf, t).item<double>();
    double ref = 0;
    auto pa = probs.accessor<double, 4>();
    auto ya = pseudo.accessor<double, 4>();
    auto ca = conf.accessor<double, 4>();
    for (int b = 0; b < 2; ++b)
      for (int h = 0; h < 6; ++h)
        for (int w = 0; w < 6; ++w)
          if (ca[b][0][h][w] > t)
            for (int c = 0; c < 4; ++c)
              if (ya[b][c][h][w] != 0) ref -= ya[b][c][h][w] * std::log(std::max(pa[b][c][h][w], 1e-7));
    ref /= 2;
    worst = std::max(worst, std::abs(got - ref));
  }
  v.require(worst <= 1e-12, "masked sum vs subset CE " + std::to_string(worst));
  if (v.pass) v.detail << "L_D " << ld + 0.0 << ", L_adv " << adv << ", masked CE residual " << worst;
  return v;
}

// ---- 11 ------------------------------------------------------------------

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "tissueseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, e);
  if (err) *err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Verdict determinism() {
  Verdict v;
  ::setenv(kDeterministicEnv, "1", 1);
  const auto root = fs::temp_directory_path() / "tissueseg_acceptance_det";
  fs::remove_all(root);
  const auto raw = (root / "raw").string();
  const auto prep = (root / "prep").string();
  std::string err;
  v.require(cli({"synth", "-o", raw, "--count", "12", "--unlabeled", "8", "--height", "48", "--width",
                 "48", "--seed", "4"}, &err) == 0, "synth: " + err);
  v.require(cli({"prepare", "--in", raw, "--out", prep, "--side", "64", "--seed", "4"}, &err) == 0,
            "prepare: " + err);
  for (const char* run : {"a", "b"}) {
    const auto out = (root / (std::string("sl_") + run)).string();
    v.require(cli({"train", "--dataset", prep, "-o", out, "--model", "tiny", "--epochs", "3",
                   "--batch-size", "4", "--seed", "21"}, &err) == 0,
              "train: " + err);
  }
  const auto log_a = slurp(root / "sl_a" / "epoch_log.csv");
  v.require(!log_a.empty() && log_a == slurp(root / "sl_b" / "epoch_log.csv"), "epoch logs differ");
  for (const char* run : {"a", "b"}) {
    const auto out = (root / (std::string("ssl_") + run)).string();
    v.require(cli({"ssl-train", "--dataset", prep, "-o", out, "--model", "tiny", "--checkpoint",
                   (root / "sl_a" / "checkpoint").string(), "--rounds", "2", "--runs", "2", "--pick",
                   "2", "--epochs", "1", "--batch-size", "4", "--seed", "21"}, &err) == 0,
              "ssl-train: " + err);
  }
  const auto picked = slurp(root / "ssl_a" / "picked.json");
  v.require(!picked.empty() && picked == slurp(root / "ssl_b" / "picked.json"), "picked records differ");
  if (v.pass) v.detail << "epoch_log.csv and picked.json byte-identical across reruns";
  fs::remove_all(root);
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {"metric identity", metric_identity},     {"metric oracle", metric_oracle},
      {"gradient suite", gradient_suite},       {"loss limits", loss_limits},
      {"shape pyramid", shape_pyramid},         {"p-scse contract", pscse_contract},
      {"self-training bookkeeping", ssl_bookkeeping}, {"overfit sanity", overfit},
      {"augmentation statistics", augmentation_stats}, {"gan loss limits", gan_limits},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].name << " ("
              << secs << " s): " << v.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
