#include "mtk/vq.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "mtk/checkpoint.hpp"
#include "mtk/optim.hpp"

namespace mtk::vq {

Codebook::Codebook(int64_t n, int64_t c, Rng& rng) {
  double bound = 1.0 / double(n);
  entries = Array::uniform({n, c}, -bound, bound, rng, true);
}

QuantizeResult quantize(const Array& z_hat, const Codebook& cb) {
  int64_t c = cb.width();
  if (z_hat.dim(-1) != c)
    throw std::invalid_argument("quantize: latent width " + std::to_string(z_hat.dim(-1)) +
                                " does not match codebook width " + std::to_string(c));
  int64_t rows = z_hat.size() / c;
  int64_t n = cb.size();
  const auto& zv = z_hat.data();
  const auto& ev = cb.entries.data();
  QuantizeResult out;
  out.idx.resize(size_t(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* z = zv.data() + r * c;
    double best = 1e300;
    int64_t best_k = 0;
    for (int64_t k = 0; k < n; ++k) {
      const double* e = ev.data() + k * c;
      double d = 0.0;
      for (int64_t i = 0; i < c; ++i) {
        double diff = z[i] - e[i];
        d += diff * diff;
      }
      if (d < best) {  // strict: ties keep the lowest index
        best = d;
        best_k = k;
      }
    }
    out.idx[size_t(r)] = best_k;
  }
  out.z_q = nd::reshape(nd::gather_rows(cb.entries, out.idx), z_hat.shape());
  return out;
}

Array straight_through(const Array& z_hat, const Array& z_q) {
  if (z_hat.shape() != z_q.shape())
    throw std::invalid_argument("straight_through: shape mismatch");
  // z_hat + sg(z_q - z_hat) as a single op: the forward value is a bitwise
  // copy of z_q (no arithmetic round-off), the backward is the identity into
  // z_hat; z_q's own graph is cut, exactly like the composed form.
  auto zn = z_hat.node();
  return nd::custom_op(z_q.shape(), z_q.data(), {z_hat},
                       [zn](nd::detail::Node& self) {
                         nd::detail::accumulate(zn, self.grad);
                       });
}

namespace {

Array time_diff(const Array& x) {
  int64_t t = x.dim(1);
  return nd::sub(nd::slice(x, 1, 1, t - 1), nd::slice(x, 1, 0, t - 1));
}

// geodesic over Rot6D groups + L1 over plain channels + MSE over contacts
std::pair<Array, double> reconstruction_term(const Array& m, const Array& m_hat,
                                             const motion::PartInfo& info,
                                             double* contact_out) {
  std::vector<Array> terms;
  if (info.rot_channels > 0) {
    int64_t joints = info.rot_channels / 6;
    auto as_rots = [&](const Array& x) {
      auto r = nd::slice(x, -1, 0, info.rot_channels);
      return nd::reshape(r, {x.dim(0), x.dim(1), joints, 6});
    };
    terms.push_back(motion::geodesic_loss_rot6d(as_rots(m_hat), as_rots(m)));
  }
  // plain (non-rotation, non-contact) channels under L1
  int64_t plain_begin = info.rot_channels + (info.contact_count > 0 ? info.contact_count : 0);
  int64_t plain_width = info.width - plain_begin;
  if (plain_width > 0) {
    terms.push_back(nd::l1(nd::slice(m_hat, -1, plain_begin, plain_width),
                           nd::slice(m, -1, plain_begin, plain_width)));
  }
  Array rec = terms.empty() ? Array::scalar(0.0) : terms[0];
  for (size_t i = 1; i < terms.size(); ++i) rec = nd::add(rec, terms[i]);

  Array contact;
  if (info.contact_count > 0) {
    contact = nd::mse(nd::slice(m_hat, -1, info.contact_begin, info.contact_count),
                      nd::slice(m, -1, info.contact_begin, info.contact_count));
    *contact_out = contact.item();
    rec = nd::add(rec, contact);
  } else {
    *contact_out = 0.0;
  }
  return {rec, 0.0};
}

}  // namespace

VqLossTerms vq_loss(const Array& m, const Array& m_hat, const Array& z_hat,
                    const Array& z_q, const motion::PartInfo& info,
                    bool with_vel_acc) {
  if (m.shape() != m_hat.shape())
    throw std::invalid_argument("vq_loss: motion shape mismatch");
  if (m.dim(1) < 3)
    throw std::invalid_argument("vq_loss: need at least 3 frames for acceleration");

  VqLossTerms out;
  double contact = 0.0;
  auto [rec, _] = reconstruction_term(m, m_hat, info, &contact);
  out.contact = contact;
  out.rec = rec.item() - contact;
  Array total = rec;

  if (with_vel_acc) {
    Array mv = time_diff(m), mhv = time_diff(m_hat);
    Array ma = time_diff(mv), mha = time_diff(mhv);
    Array vel = info.is_face ? nd::mse(mhv, mv) : nd::l1(mhv, mv);
    Array acc = info.is_face ? nd::mse(mha, ma) : nd::l1(mha, ma);
    out.vel = vel.item();
    out.acc = acc.item();
    total = nd::add(total, nd::add(vel, acc));
  }

  // ||sg(z_hat) - z_q||^2 pulls the codebook, ||z_hat - sg(z_q)||^2 commits
  // the encoder; both mean-reduced
  Array codebook_term = nd::mse(z_q, nd::detach(z_hat));
  Array commit_term = nd::mse(z_hat, nd::detach(z_q));
  out.codebook = codebook_term.item();
  out.commit = commit_term.item();
  total = nd::add(total, nd::add(codebook_term, commit_term));

  out.total = total;
  return out;
}

VqVae::VqVae(motion::BodyPart part, const VqConfig& cfg, Rng& rng)
    : part_(part), info_(motion::part_info(part)), cfg_(cfg) {
  int64_t d = info_.width, h = cfg.hidden, c = cfg.latent_channels;
  enc1_ = nn::Conv1d(d, h, 4, 2, 1, rng);
  enc2_ = nn::Conv1d(h, h, 4, 2, 1, rng);
  enc3_ = nn::Conv1d(h, c, 3, 1, 1, rng);
  dec1_ = nn::Conv1d(c, h, 3, 1, 1, rng);
  dec2_ = nn::Conv1d(h, h, 3, 1, 1, rng);
  dec3_ = nn::Conv1d(h, d, 3, 1, 1, rng);
  codebook_ = Codebook(cfg.codebook_size, c, rng);
}

Array VqVae::encode(const Array& m) const {
  if (m.ndim() != 3 || m.dim(2) != info_.width)
    throw std::invalid_argument("encode: expected (B, T, " + std::to_string(info_.width) + ")");
  int64_t t = m.dim(1);
  if (t % kDownsample != 0)
    throw std::invalid_argument(
        "encode: T = " + std::to_string(t) + " not divisible by " +
        std::to_string(kDownsample) + "; pad to " +
        std::to_string((t / kDownsample + 1) * kDownsample) + " frames");
  Array x = nd::silu(enc1_(m));
  x = nd::silu(enc2_(x));
  return enc3_(x);
}

Array VqVae::decode(const Array& z) const {
  Array x = nd::silu(dec1_(z));
  x = nd::repeat_interleave(x, 1, 2);
  x = nd::silu(dec2_(x));
  x = nd::repeat_interleave(x, 1, 2);
  return dec3_(x);
}

void VqVae::params(nn::ParamMap& pm) const {
  enc1_.params("enc1", pm);
  enc2_.params("enc2", pm);
  enc3_.params("enc3", pm);
  dec1_.params("dec1", pm);
  dec2_.params("dec2", pm);
  dec3_.params("dec3", pm);
  pm.add("codebook", codebook_.entries);
}

void VqVae::set_trainable(bool trainable) {
  nn::ParamMap pm;
  params(pm);
  for (auto& [name, arr] : pm.items()) const_cast<Array&>(arr).set_requires_grad(trainable);
}

void VqVae::save(const std::string& path) const {
  nn::ParamMap pm;
  // construction metadata first so load() can rebuild the right shape
  pm.add("meta", Array::from({3}, {double(cfg_.codebook_size),
                                   double(cfg_.latent_channels), double(cfg_.hidden)}));
  params(pm);
  save_checkpoint(path, "MTVQ", uint8_t(part_), pm);
}

VqVae VqVae::load(const std::string& path) {
  RawCheckpoint raw = read_checkpoint_raw(path, "MTVQ");
  if (raw.tag > 3) throw IoError(IoErrorKind::bad_data, path, "bad part tag");
  const nd::Array* meta = raw.find("meta");
  if (!meta || meta->size() != 3)
    throw IoError(IoErrorKind::bad_data, path, "missing meta tensor");
  VqConfig cfg;
  cfg.codebook_size = int64_t(meta->data()[0]);
  cfg.latent_channels = int64_t(meta->data()[1]);
  cfg.hidden = int64_t(meta->data()[2]);
  Rng rng(0);
  VqVae model(motion::BodyPart(raw.tag), cfg, rng);
  nn::ParamMap pm;
  pm.add("meta", Array::from({3}, {0, 0, 0}));
  model.params(pm);
  load_checkpoint(path, "MTVQ", pm);
  return model;
}

VqTrainResult train_vqvae(const std::vector<motion::MotionSequence>& clips,
                          motion::BodyPart part, const VqConfig& cfg) {
  if (clips.empty()) throw std::invalid_argument("train_vqvae: empty corpus");
  auto info = motion::part_info(part);
  Rng rng(cfg.seed);
  Rng init_rng = rng.fork("init");
  VqTrainResult result{VqVae(part, cfg, init_rng), {}};
  VqVae& model = result.model;

  // part slices up front; windows index into these
  std::vector<motion::MotionSequence> slices;
  slices.reserve(clips.size());
  for (const auto& c : clips) slices.push_back(c.part(part));
  int64_t window = cfg.window;
  for (const auto& s : slices)
    if (s.frames < window)
      throw std::invalid_argument("train_vqvae: clip shorter than training window");

  nn::ParamMap pm;
  model.params(pm);
  Adam opt(pm.arrays(), AdamConfig{cfg.lr});

  int64_t tail = std::max<int64_t>(1, int64_t(std::llround(double(cfg.epochs) * cfg.lr_final_frac)));
  Rng sample_rng = rng.fork("windows");

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(epoch >= cfg.epochs - tail ? cfg.lr_final : cfg.lr);
    double loss_sum = 0.0, rec_sum = 0.0;
    int64_t steps = 0;
    std::set<int64_t> used;
    int64_t batches = (cfg.windows_per_epoch + cfg.batch - 1) / cfg.batch;
    for (int64_t bi = 0; bi < batches; ++bi) {
      int64_t bsize = std::min(cfg.batch, cfg.windows_per_epoch - bi * cfg.batch);
      std::vector<double> batch_data(static_cast<size_t>(bsize * window * info.width));
      for (int64_t k = 0; k < bsize; ++k) {
        const auto& s = slices[sample_rng.below(uint64_t(slices.size()))];
        int64_t start = int64_t(sample_rng.below(uint64_t(s.frames - window + 1)));
        std::copy(s.data.begin() + start * info.width,
                  s.data.begin() + (start + window) * info.width,
                  batch_data.begin() + k * window * info.width);
      }
      Array m = Array::from({bsize, window, info.width}, std::move(batch_data));
      Array z_hat = model.encode(m);
      auto q = quantize(z_hat, model.codebook());
      used.insert(q.idx.begin(), q.idx.end());
      Array z_st = straight_through(z_hat, q.z_q);
      Array m_hat = model.decode(z_st);
      auto terms = vq_loss(m, m_hat, z_hat, q.z_q, info, cfg.vel_acc_terms);
      opt.zero_grad();
      nd::backward(terms.total);
      opt.step();
      loss_sum += terms.total.item();
      rec_sum += terms.rec + terms.contact;
      ++steps;
    }
    result.curve.push_back({loss_sum / double(steps), rec_sum / double(steps),
                            double(used.size()) / double(cfg.codebook_size)});
  }
  return result;
}

}  // namespace mtk::vq
