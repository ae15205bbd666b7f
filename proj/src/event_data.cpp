#include "sast/event_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sast/kv_file.hpp"
#include "sast/rng.hpp"

namespace sast {

namespace {

namespace fs = std::filesystem;

constexpr std::int64_t kMaxTimestamp = (std::int64_t{1} << 23) - 1;

void check_event_in_bounds(const Event& e, int width, int height, std::size_t index,
                           const char* what) {
  if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
    throw std::out_of_range(std::string(what) + ": record " + std::to_string(index) + ": pixel (" +
                            std::to_string(e.x) + "," + std::to_string(e.y) + ") outside " +
                            std::to_string(width) + "x" + std::to_string(height) + " sensor");
  }
  if (e.timestamp_us < 0) {
    throw std::out_of_range(std::string(what) + ": record " + std::to_string(index) +
                            ": negative timestamp");
  }
  if (e.polarity != 0 && e.polarity != 1) {
    throw std::out_of_range(std::string(what) + ": record " + std::to_string(index) +
                            ": polarity must be 0 or 1");
  }
}

}  // namespace

EventStream parse_nmnist(const std::vector<unsigned char>& bytes, int width, int height) {
  if (bytes.size() % 5 != 0) {
    throw MalformedFile("event data: byte length " + std::to_string(bytes.size()) +
                        " is not a multiple of 5");
  }
  EventStream stream;
  stream.width = width;
  stream.height = height;
  stream.events.reserve(bytes.size() / 5);
  for (std::size_t r = 0; r * 5 < bytes.size(); ++r) {
    const unsigned char* p = bytes.data() + r * 5;
    Event e;
    e.x = p[0];
    e.y = p[1];
    e.polarity = (p[2] >> 7) & 1;
    e.timestamp_us = (std::int64_t{p[2] & 0x7f} << 16) | (std::int64_t{p[3]} << 8) | p[4];
    check_event_in_bounds(e, width, height, r, "event data");
    stream.events.push_back(e);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.timestamp_us < b.timestamp_us; });
  stream.duration_us = stream.events.empty() ? 0 : stream.events.back().timestamp_us;
  return stream;
}

EventStream parse_nmnist_file(const std::string& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open event file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_nmnist(bytes, width, height);
  } catch (const MalformedFile& e) {
    throw MalformedFile(path + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw std::out_of_range(path + ": " + e.what());
  }
}

std::vector<unsigned char> serialize_nmnist(const EventStream& stream) {
  std::vector<unsigned char> bytes;
  bytes.reserve(stream.events.size() * 5);
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    check_event_in_bounds(e, stream.width, stream.height, i, "serialize");
    if (e.x > 255 || e.y > 255) {
      throw std::invalid_argument("serialize: record " + std::to_string(i) +
                                  ": coordinates exceed the 1-byte format range");
    }
    if (e.timestamp_us > kMaxTimestamp) {
      throw std::invalid_argument("serialize: record " + std::to_string(i) +
                                  ": timestamp exceeds the 23-bit format range");
    }
    bytes.push_back(static_cast<unsigned char>(e.x));
    bytes.push_back(static_cast<unsigned char>(e.y));
    bytes.push_back(static_cast<unsigned char>(((e.polarity & 1) << 7) |
                                               ((e.timestamp_us >> 16) & 0x7f)));
    bytes.push_back(static_cast<unsigned char>((e.timestamp_us >> 8) & 0xff));
    bytes.push_back(static_cast<unsigned char>(e.timestamp_us & 0xff));
  }
  return bytes;
}

Mat bin_event_counts(const EventStream& stream, int steps) {
  if (steps < 1) throw std::invalid_argument("bin_events: step count must be >= 1");
  if (stream.width < 1 || stream.height < 1) {
    throw std::invalid_argument("bin_events: sensor dimensions must be positive");
  }
  const int cells = stream.height * stream.width;
  Mat counts = Mat::Zero(steps, 2 * cells);
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    check_event_in_bounds(e, stream.width, stream.height, i, "bin_events");
    if (e.timestamp_us > stream.duration_us) {
      throw std::out_of_range("bin_events: record " + std::to_string(i) + ": timestamp " +
                              std::to_string(e.timestamp_us) + " exceeds stream duration " +
                              std::to_string(stream.duration_us));
    }
    const std::int64_t bin =
        stream.duration_us == 0
            ? 0
            : std::min<std::int64_t>(e.timestamp_us * steps / stream.duration_us, steps - 1);
    const int flat = e.polarity * cells + e.y * stream.width + e.x;
    counts(bin, flat) += 1.0;
  }
  return counts;
}

FrameTensor bin_events(const EventStream& stream, int steps) {
  Mat counts = bin_event_counts(stream, steps);
  const double peak = counts.maxCoeff();
  if (peak > 0.0) counts /= peak;
  return counts;
}

EventStream drop_events(const EventStream& stream, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("drop_events: probability must be in [0, 1], got " +
                                std::to_string(p));
  }
  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.duration_us = stream.duration_us;
  out.events.reserve(stream.events.size());
  Rng rng(seed);
  for (const Event& e : stream.events) {
    if (rng.uniform() >= p) out.events.push_back(e);
  }
  return out;
}

namespace {

EventStream synthesize_stream(const SyntheticSpec& spec, int label, Rng& rng) {
  constexpr double kPi = 3.14159265358979323846;
  EventStream stream;
  stream.width = spec.width;
  stream.height = spec.height;
  stream.duration_us = spec.duration_us;

  const double cx = (spec.width - 1) / 2.0;
  const double cy = (spec.height - 1) / 2.0;
  const double angle = 2.0 * kPi * label / spec.classes + 0.10 * rng.normal();
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const double extent = 0.38 * std::min(spec.width, spec.height);
  const double side_offset = 0.06 * std::min(spec.width, spec.height) * rng.normal();
  const double x0 = cx - extent * dx - side_offset * dy;
  const double y0 = cy - extent * dy + side_offset * dx;
  const double speed = rng.uniform(0.9, 1.1);
  const double blob_sigma = rng.uniform(0.8, 1.3);

  const int target = static_cast<int>(
      std::llround(spec.events_per_sample * rng.uniform(0.9, 1.1)));
  std::vector<std::int64_t> times(static_cast<std::size_t>(std::max(target, 0)));
  for (auto& t : times) t = static_cast<std::int64_t>(rng.below(spec.duration_us));
  std::sort(times.begin(), times.end());

  stream.events.reserve(times.size());
  for (const std::int64_t t : times) {
    Event e;
    e.timestamp_us = t;
    double px, py;
    if (rng.uniform() < spec.noise_fraction) {
      px = rng.uniform(0.0, spec.width - 1.0);
      py = rng.uniform(0.0, spec.height - 1.0);
      e.polarity = static_cast<int>(rng.below(2));
    } else {
      const double progress = speed * static_cast<double>(t) / spec.duration_us;
      const double bx = x0 + 2.0 * extent * progress * dx;
      const double by = y0 + 2.0 * extent * progress * dy;
      px = bx + blob_sigma * rng.normal();
      py = by + blob_sigma * rng.normal();
      e.polarity = ((px - bx) * dx + (py - by) * dy) >= 0.0 ? 1 : 0;
    }
    e.x = static_cast<int>(std::llround(px));
    e.y = static_cast<int>(std::llround(py));
    if (e.x < 0 || e.x >= spec.width || e.y < 0 || e.y >= spec.height) continue;
    stream.events.push_back(e);
  }
  return stream;
}

}  // namespace

EventDataset make_synthetic_events(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synthetic spec: classes must be >= 2");
  if (spec.samples_per_class < 1) {
    throw std::invalid_argument("synthetic spec: samples_per_class must be >= 1");
  }
  if (spec.width < 2 || spec.height < 2) {
    throw std::invalid_argument("synthetic spec: sensor must be at least 2x2");
  }
  if (spec.duration_us < 1 || spec.duration_us > kMaxTimestamp) {
    throw std::invalid_argument("synthetic spec: duration must be in [1, 2^23) microseconds");
  }
  EventDataset ds;
  ds.width = spec.width;
  ds.height = spec.height;
  ds.num_classes = spec.classes;
  ds.streams.reserve(static_cast<std::size_t>(spec.classes) * spec.samples_per_class);
  for (int c = 0; c < spec.classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      Rng rng = stream_rng(spec.seed, Stream::Data,
                           static_cast<std::uint64_t>(c) * 1000003ull + static_cast<std::uint64_t>(s));
      ds.streams.push_back(synthesize_stream(spec, c, rng));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

LabeledDataset bin_dataset(const EventDataset& events, int steps) {
  LabeledDataset ds;
  ds.num_classes = events.num_classes;
  ds.steps = steps;
  ds.dim = 2 * events.height * events.width;
  ds.frames.reserve(events.size());
  ds.labels = events.labels;
  for (const EventStream& stream : events.streams) {
    ds.frames.push_back(bin_events(stream, steps));
  }
  return ds;
}

LabeledDataset make_synthetic_dataset(const SyntheticSpec& spec, int steps) {
  return bin_dataset(make_synthetic_events(spec), steps);
}

SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double train_fraction,
                              double val_fraction, double test_fraction, std::uint64_t seed) {
  if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0 ||
      train_fraction + val_fraction + test_fraction > 1.0 + 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative and sum to at most 1");
  }
  SplitIndices split;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> indices;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) indices.push_back(static_cast<int>(i));
    }
    Rng rng = stream_rng(seed, Stream::Shuffle, static_cast<std::uint64_t>(c));
    rng.shuffle(indices);
    const auto n = indices.size();
    const auto n_val = static_cast<std::size_t>(std::floor(n * val_fraction));
    const auto n_test = static_cast<std::size_t>(std::floor(n * test_fraction));
    const auto n_train = n - n_val - n_test;
    split.train.insert(split.train.end(), indices.begin(), indices.begin() + n_train);
    split.val.insert(split.val.end(), indices.begin() + n_train, indices.begin() + n_train + n_val);
    split.test.insert(split.test.end(), indices.begin() + n_train + n_val, indices.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& indices) {
  LabeledDataset out;
  out.num_classes = ds.num_classes;
  out.steps = ds.steps;
  out.dim = ds.dim;
  out.frames.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (const int i : indices) {
    out.frames.push_back(ds.frames.at(i));
    out.labels.push_back(ds.labels.at(i));
  }
  return out;
}

EventDataset subset(const EventDataset& ds, const std::vector<int>& indices) {
  EventDataset out;
  out.num_classes = ds.num_classes;
  out.width = ds.width;
  out.height = ds.height;
  out.streams.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (const int i : indices) {
    out.streams.push_back(ds.streams.at(i));
    out.labels.push_back(ds.labels.at(i));
  }
  return out;
}

void write_manifest_dataset(const std::string& root, const EventDataset& ds) {
  fs::create_directories(root);
  std::ofstream manifest(fs::path(root) / "manifest.cfg");
  if (!manifest) throw std::runtime_error("cannot write manifest under " + root);
  manifest << "# event dataset manifest\n";
  manifest << "schema = sastnet.dataset.v1\n";
  manifest << "sensor_width = " << ds.width << "\n";
  manifest << "sensor_height = " << ds.height << "\n";
  manifest << "num_classes = " << ds.num_classes << "\n";
  std::vector<int> counters(ds.num_classes, 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int label = ds.labels[i];
    const fs::path dir = fs::path(root) / std::to_string(label);
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.bin", counters[label]++);
    const auto bytes = serialize_nmnist(ds.streams[i]);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

EventDataset load_manifest_dataset(const std::string& root) {
  const fs::path manifest_path = fs::path(root) / "manifest.cfg";
  if (!fs::exists(manifest_path)) {
    throw MalformedFile("dataset manifest not found: " + manifest_path.string());
  }
  const KvFile manifest = parse_kv_file(manifest_path.string());
  const std::string schema = manifest.get_string("schema");
  if (schema != "sastnet.dataset.v1") {
    throw MalformedFile(manifest_path.string() + ": unsupported schema '" + schema + "'");
  }
  EventDataset ds;
  ds.width = static_cast<int>(manifest.get_int("sensor_width"));
  ds.height = static_cast<int>(manifest.get_int("sensor_height"));
  ds.num_classes = static_cast<int>(manifest.get_int("num_classes"));
  if (ds.width < 1 || ds.height < 1 || ds.num_classes < 2) {
    throw MalformedFile(manifest_path.string() + ": invalid sensor size or class count");
  }
  for (int c = 0; c < ds.num_classes; ++c) {
    const fs::path dir = fs::path(root) / std::to_string(c);
    if (!fs::exists(dir)) {
      throw MalformedFile("dataset class directory missing: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".bin") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ds.streams.push_back(parse_nmnist_file(file.string(), ds.width, ds.height));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

}  // namespace sast
