#include "respore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "respore/errors.hpp"

namespace respore {

namespace {

constexpr char kMagic[8] = {'R', 'E', 'S', 'P', 'O', 'R', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& buf, double d) {
  put_u64(buf, std::bit_cast<std::uint64_t>(d));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return static_cast<unsigned char>(data_[pos_++]);
  }
  void raw(char* dst, std::size_t count) {
    need(count);
    std::memcpy(dst, data_.data() + pos_, count);
    pos_ += count;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t count) {
    if (data_.size() - pos_ < count) {
      throw CorruptCheckpointError("checkpoint truncated: " + path_);
    }
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(Network& net, const std::string& path,
                     const AdamState* optimizer) {
  const auto state = state_arrays(net);
  std::size_t state_total = 0;
  for (const auto& s : state) state_total += s.size();
  const std::size_t learnable_total = learnable_count(net);

  std::string buf;
  buf.reserve(72 + 8 * state_total);
  buf.append(kMagic, sizeof(kMagic));
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(net.cfg.base_width));
  put_u32(buf, static_cast<std::uint32_t>(net.cfg.input_h));
  put_u32(buf, static_cast<std::uint32_t>(net.cfg.input_w));
  put_u64(buf, net.cfg.seed);
  put_f64(buf, net.bn1.momentum);
  put_f64(buf, net.bn1.epsilon);
  buf.push_back(static_cast<char>(kLossConventionSampleSumBatchMean));
  buf.push_back(optimizer ? 1 : 0);
  buf.append(6, '\0');
  put_u64(buf, state_total);
  put_u64(buf, learnable_total);
  for (const auto& s : state) {
    for (double d : s) put_f64(buf, d);
  }
  if (optimizer) {
    if (optimizer->m.size() != learnable_total ||
        optimizer->v.size() != learnable_total) {
      throw UsageError("optimizer state size does not match network");
    }
    put_u64(buf, optimizer->t);
    for (double d : optimizer->m) put_f64(buf, d);
    for (double d : optimizer->v) put_f64(buf, d);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  Reader r(data, path);

  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw CorruptCheckpointError("not a checkpoint file: " + path);
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " +
                                 std::to_string(version) + ": " + path);
  }
  NetworkConfig cfg;
  cfg.base_width = static_cast<int>(r.u32());
  cfg.input_h = static_cast<int>(r.u32());
  cfg.input_w = static_cast<int>(r.u32());
  cfg.seed = r.u64();
  const double momentum = r.f64();
  const double epsilon = r.f64();
  const std::uint8_t loss_convention = r.u8();
  const std::uint8_t has_opt = r.u8();
  for (int i = 0; i < 6; ++i) r.u8();
  const std::uint64_t state_total = r.u64();
  const std::uint64_t learnable_total = r.u64();

  LoadedCheckpoint result;
  result.loss_convention = loss_convention;
  result.net = build_network(cfg);
  result.net.cfg.seed = cfg.seed;

  auto apply_bn_cfg = [&](BatchNorm& bn) {
    bn.momentum = momentum;
    bn.epsilon = epsilon;
  };
  apply_bn_cfg(result.net.bn1);
  for (auto& blk : result.net.blocks) {
    apply_bn_cfg(blk.bn_a);
    apply_bn_cfg(blk.bn_b);
    if (blk.has_projection) apply_bn_cfg(blk.proj_bn);
  }

  const auto state = state_arrays(result.net);
  std::size_t expect = 0;
  for (const auto& s : state) expect += s.size();
  if (expect != state_total || learnable_total != learnable_count(result.net)) {
    throw CorruptCheckpointError("checkpoint state count mismatch: " + path);
  }
  for (const auto& s : state) {
    for (double& d : s) d = r.f64();
  }
  if (has_opt) {
    AdamState opt;
    opt.t = r.u64();
    opt.m.resize(learnable_total);
    opt.v.resize(learnable_total);
    for (double& d : opt.m) d = r.f64();
    for (double& d : opt.v) d = r.f64();
    result.optimizer = std::move(opt);
  }
  if (r.remaining() != 0) {
    throw CorruptCheckpointError("trailing bytes in checkpoint: " + path);
  }
  return result;
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 const NetworkConfig& expected) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  if (ckpt.net.cfg.base_width != expected.base_width ||
      ckpt.net.cfg.input_h != expected.input_h ||
      ckpt.net.cfg.input_w != expected.input_w) {
    throw WidthMismatchError(
        "checkpoint configuration (width " +
        std::to_string(ckpt.net.cfg.base_width) + ", input " +
        std::to_string(ckpt.net.cfg.input_h) + "x" +
        std::to_string(ckpt.net.cfg.input_w) + ") does not match expected (" +
        std::to_string(expected.base_width) + ", " +
        std::to_string(expected.input_h) + "x" +
        std::to_string(expected.input_w) + "): " + path);
  }
  return ckpt;
}

}  // namespace respore
