#include <cmath>

#include "json.hpp"
#include "vds/byte_io.hpp"
#include "vds/error.hpp"
#include "vds/trainer.hpp"

namespace vds {

namespace {
constexpr char kModuleMagic[4] = {'V', 'D', 'S', 'M'};
constexpr std::uint32_t kModuleVersion = 1;
}  // namespace

std::string encode_module(const ModuleFile& module) {
  const nlohmann::json header = {{"d", module.params.d},
                                 {"mode", std::string(to_string(module.mode))},
                                 {"tau", module.tau},
                                 {"seed", module.seed},
                                 {"epochs", module.epochs}};
  const std::string header_text = header.dump();
  std::string out(kModuleMagic, 4);
  byte_io::put_u32(out, kModuleVersion);
  byte_io::put_u64(out, header_text.size());
  out += header_text;
  module.params.for_each_group([&](std::string_view, std::span<const double> values) {
    for (double x : values) byte_io::put_f32(out, static_cast<float>(x));
  });
  return out;
}

ModuleFile decode_module(const std::string& bytes) {
  byte_io::Reader in(bytes);
  if (in.take(4, "magic") != std::string(kModuleMagic, 4))
    throw Error(ErrorCode::BadMagic, "not a VDSM file");
  const auto version = in.u32("version");
  if (version != kModuleVersion)
    throw Error(ErrorCode::UnsupportedVersion, "VDSM version " + std::to_string(version));
  const auto header_len = in.u64("header length");
  if (header_len > in.remaining()) throw Error(ErrorCode::Truncated, "file ends inside header");
  const std::string header_text = in.take(static_cast<std::size_t>(header_len), "header");

  ModuleFile module;
  std::size_t d = 0;
  try {
    const auto header = nlohmann::json::parse(header_text);
    d = header.at("d").get<std::size_t>();
    const auto mode = parse_logits_mode(header.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::BadHeader, "unknown logits mode");
    module.mode = *mode;
    module.tau = header.at("tau").get<double>();
    module.seed = header.at("seed").get<std::uint64_t>();
    module.epochs = header.at("epochs").get<std::size_t>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BadHeader, e.what());
  }
  if (d == 0 || d % 16 != 0 || d > (std::size_t{1} << 20))
    throw Error(ErrorCode::BadHeader, "module dimension " + std::to_string(d) + " is invalid");

  module.params = ClusterModuleParams::zeros(d);
  const std::size_t payload = module.params.parameter_count() * 4;
  if (in.remaining() < payload) throw Error(ErrorCode::Truncated, "parameter blocks are short");
  if (in.remaining() > payload) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after parameters");
  module.params.for_each_group([&](std::string_view name, std::span<double> values) {
    for (double& x : values) {
      x = in.f32("parameters");
      if (!std::isfinite(x))
        throw Error(ErrorCode::NonFinite, std::string(name) + " holds a non-finite value");
    }
  });
  return module;
}

void write_module(const ModuleFile& module, const std::filesystem::path& path) {
  byte_io::write_file(path, encode_module(module));
}

ModuleFile read_module(const std::filesystem::path& path) {
  return decode_module(byte_io::read_file(path));
}

}  // namespace vds
