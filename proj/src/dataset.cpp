#include "alma/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <random>

#include "alma/errors.hpp"
#include "binary_io.hpp"
#include "portable_random.hpp"

namespace alma {

namespace {

constexpr std::string_view kDatasetMagic = "ALMADS1\n";

Shape parse_shape_list(const std::string& text, std::size_t line_no) {
  Shape shape;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      shape.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": bad shape entry '" + item + "'");
    }
    pos = comma + 1;
  }
  return shape;
}

std::size_t parse_count(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + text + "'");
  }
}

}  // namespace

void Dataset::validate() const {
  if (images.size() != labels.size()) throw InvalidArgument("dataset: image and label counts differ");
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != shape) {
      throw ShapeError("dataset: image " + std::to_string(i) + " has shape " + shape_to_string(images[i].shape()) +
                       ", expected " + shape_to_string(shape));
    }
  }
}

std::string serialize_dataset(const Dataset& data) {
  data.validate();
  std::string out(kDatasetMagic);
  out += "count=" + std::to_string(data.size()) + "\n";
  std::string dims;
  for (std::size_t i = 0; i < data.shape.size(); ++i) dims += (i ? "," : "") + std::to_string(data.shape[i]);
  out += "shape=" + dims + "\n";
  out += "label_width=8\nend\n";
  for (const auto& img : data.images) io::put_block(out, img.data());
  for (auto label : data.labels) io::put_u64(out, label);
  return out;
}

Dataset parse_dataset(const std::string& bytes) {
  const io::Header header = io::parse_header(bytes, kDatasetMagic);
  Dataset data;
  std::size_t count = 0;
  bool have_count = false;
  for (const auto& line : header.lines) {
    if (line.key == "count") {
      count = parse_count(line.value, line.line_no);
      have_count = true;
    } else if (line.key == "shape") {
      data.shape = parse_shape_list(line.value, line.line_no);
    } else if (line.key == "label_width") {
      if (line.value != "8") throw ParseError("line " + std::to_string(line.line_no) + ": label_width must be 8");
    } else {
      throw ParseError("line " + std::to_string(line.line_no) + ": unknown key '" + line.key + "'");
    }
  }
  if (!have_count) throw ParseError("header: missing count");
  if (data.shape.empty()) throw ParseError("header: missing shape");

  io::Reader reader(bytes, header.payload_offset);
  const std::size_t n = shape_size(data.shape);
  data.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    data.images.emplace_back(data.shape, reader.block(n, "image " + std::to_string(i)));
  }
  data.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) data.labels.push_back(reader.u64("label"));
  if (!reader.at_end()) {
    throw ParseError("offset " + std::to_string(reader.offset()) + ": trailing bytes after labels");
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(io::read_file(path)); }

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  io::write_file(path, serialize_dataset(data));
}

// ---- PGM / PPM ---------------------------------------------------------------

namespace {

struct Netpbm {
  std::size_t channels = 1;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> planar;  // channel-major, values in [0,1]
};

Netpbm read_netpbm(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string where = path.string();
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError(where + ": not a PGM/PPM file");
  const char kind = bytes[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw ParseError(where + ": unsupported netpbm variant P" + std::string(1, kind));
  }
  std::size_t pos = 2;
  auto next_token = [&]() -> std::string {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw ParseError(where + ": truncated header");
    return bytes.substr(start, pos - start);
  };
  auto next_int = [&](const char* what) {
    const std::string t = next_token();
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size() || v < 0) throw std::invalid_argument(t);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad " + std::string(what) + " '" + t + "'");
    }
  };

  Netpbm img;
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  img.width = next_int("width");
  img.height = next_int("height");
  const std::size_t maxval = next_int("maxval");
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw ParseError(where + ": bad dimensions or maxval");
  }
  const std::size_t pixels = img.width * img.height;
  std::vector<std::size_t> interleaved(pixels * img.channels);
  if (kind == '2' || kind == '3') {
    for (auto& v : interleaved) v = next_int("sample");
  } else {
    ++pos;  // single whitespace byte after maxval
    const std::size_t width = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + interleaved.size() * width) throw ParseError(where + ": truncated pixel data");
    for (auto& v : interleaved) {
      v = static_cast<unsigned char>(bytes[pos++]);
      if (width == 2) v = (v << 8) | static_cast<unsigned char>(bytes[pos++]);
    }
  }
  img.planar.resize(interleaved.size());
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      const std::size_t v = interleaved[p * img.channels + c];
      if (v > maxval) throw ParseError(where + ": sample exceeds maxval");
      img.planar[c * pixels + p] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  return img;
}

}  // namespace

Dataset import_image_directory(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("'" + root.string() + "' is not a directory");

  std::vector<std::pair<fs::path, std::size_t>> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    std::size_t label = 0;
    try {
      std::size_t used = 0;
      label = std::stoul(name, &used);
      if (used != name.size()) continue;
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& f : fs::directory_iterator(entry.path())) {
      const auto ext = f.path().extension().string();
      if (f.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) files.emplace_back(f.path(), label);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .pgm/.ppm files under '" + root.string() + "'");

  std::vector<Netpbm> raw;
  raw.reserve(files.size());
  bool any_colour = false;
  for (const auto& [path, label] : files) {
    raw.push_back(read_netpbm(path));
    any_colour = any_colour || raw.back().channels == 3;
  }
  const std::size_t channels = any_colour ? 3 : 1;
  Dataset data;
  data.shape = {channels, raw.front().height, raw.front().width};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto& img = raw[i];
    if (img.height != data.shape[1] || img.width != data.shape[2]) {
      throw ShapeError(files[i].first.string() + ": size differs from the first image");
    }
    if (img.channels == 1 && channels == 3) {
      const std::size_t n = img.planar.size();
      img.planar.resize(3 * n);
      std::copy_n(img.planar.begin(), n, img.planar.begin() + n);
      std::copy_n(img.planar.begin(), n, img.planar.begin() + 2 * n);
    }
    data.images.emplace_back(data.shape, std::move(img.planar));
    data.labels.push_back(files[i].second);
  }
  return data;
}

// ---- procedural desk dataset ---------------------------------------------------

namespace {

// 6x6 glyphs, '#' is foreground.
constexpr std::array<std::array<const char*, 6>, 10> kGlyphs = {{
    {".####.", "#....#", "#....#", "#....#", "#....#", ".####."},
    {"..##..", ".###..", "..##..", "..##..", "..##..", ".####."},
    {".####.", "#....#", "....#.", "..##..", ".#....", "######"},
    {"#####.", ".....#", "..###.", ".....#", ".....#", "#####."},
    {"#...#.", "#...#.", "######", "....#.", "....#.", "....#."},
    {"######", "#.....", "#####.", ".....#", ".....#", "#####."},
    {".####.", "#.....", "#####.", "#....#", "#....#", ".####."},
    {"######", "....#.", "...#..", "..#...", "..#...", "..#..."},
    {".####.", "#....#", ".####.", "#....#", "#....#", ".####."},
    {".####.", "#....#", ".#####", ".....#", "....#.", ".###.."},
}};

}  // namespace

Dataset make_desk_dataset(std::size_t count, std::uint64_t seed) {
  constexpr std::size_t C = 3, H = 8, W = 8;
  constexpr double kNoise = 0.05;
  std::mt19937_64 rng(seed);
  Dataset data;
  data.shape = {C, H, W};
  data.images.reserve(count);
  data.labels.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t label = s % 10;
    std::array<double, C> bg{}, fg{};
    for (auto& v : bg) v = 0.35 * rnd::unit_uniform(rng);
    for (auto& v : fg) v = 0.6 + 0.4 * rnd::unit_uniform(rng);
    const std::size_t dy = static_cast<std::size_t>(rng() % 3);  // top-left corner in {0,1,2}
    const std::size_t dx = static_cast<std::size_t>(rng() % 3);

    Tensor img(data.shape);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        bool on = false;
        if (y >= dy && y < dy + 6 && x >= dx && x < dx + 6) on = kGlyphs[label][y - dy][x - dx] == '#';
        for (std::size_t c = 0; c < C; ++c) {
          const double v = (on ? fg[c] : bg[c]) + kNoise * rnd::standard_normal(rng);
          img[(c * H + y) * W + x] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  return data;
}

std::vector<std::size_t> select_samples(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  idx.resize(std::min(count, n));
  return idx;
}

}  // namespace alma
