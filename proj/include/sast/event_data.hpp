#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sast/types.hpp"

namespace sast {

struct Event {
  std::int64_t timestamp_us = 0;
  int x = 0;
  int y = 0;
  int polarity = 0;
};

struct EventStream {
  std::vector<Event> events;
  int width = 0;
  int height = 0;
  std::int64_t duration_us = 0;
};

/// Temporally binned input, one row per time step, D = 2 * height * width
/// columns laid out polarity-major then row-major (p * H * W + y * W + x).
/// Entries are normalized event counts in [0, 1].
using FrameTensor = Mat;

struct LabeledDataset {
  std::vector<FrameTensor> frames;
  std::vector<int> labels;
  int num_classes = 0;
  int steps = 0;
  int dim = 0;

  std::size_t size() const { return frames.size(); }
};

struct EventDataset {
  std::vector<EventStream> streams;
  std::vector<int> labels;
  int num_classes = 0;
  int width = 0;
  int height = 0;

  std::size_t size() const { return streams.size(); }
};

/// Decodes the 5-bytes-per-event binary format: byte0 = x, byte1 = y,
/// byte2 bit 7 = polarity, byte2 bits 6..0 ++ bytes 3..4 = 23-bit timestamp
/// in microseconds. Events are stable-sorted by timestamp.
EventStream parse_nmnist(const std::vector<unsigned char>& bytes, int width, int height);
EventStream parse_nmnist_file(const std::string& path, int width, int height);

/// Inverse of parse_nmnist. Throws if an event does not fit the format
/// (coordinates > 255 or timestamp >= 2^23).
std::vector<unsigned char> serialize_nmnist(const EventStream& stream);

/// Raw per-cell event counts (time bin x flattened cell), before
/// normalization. Bin index = min(floor(t * T / duration), T - 1).
Mat bin_event_counts(const EventStream& stream, int steps);

/// Counts divided by the per-sample maximum count; all-zero input stays zero.
FrameTensor bin_events(const EventStream& stream, int steps);

/// Removes each event independently with probability p; ordering and
/// duration are preserved.
EventStream drop_events(const EventStream& stream, double p, std::uint64_t seed);

struct SyntheticSpec {
  int classes = 2;
  int samples_per_class = 10;
  int width = 8;
  int height = 8;
  std::int64_t duration_us = 100000;
  int events_per_sample = 800;
  double noise_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Moving-blob event streams with class-specific trajectories. Deterministic
/// given the spec seed; every (class, sample) pair uses its own substream.
EventDataset make_synthetic_events(const SyntheticSpec& spec);

LabeledDataset bin_dataset(const EventDataset& events, int steps);
LabeledDataset make_synthetic_dataset(const SyntheticSpec& spec, int steps);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

/// Stratified split with floor(n * fraction) validation/test samples per
/// class and the remainder in train. Deterministic given the seed.
SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double train_fraction,
                              double val_fraction, double test_fraction, std::uint64_t seed);

LabeledDataset subset(const LabeledDataset& ds, const std::vector<int>& indices);
EventDataset subset(const EventDataset& ds, const std::vector<int>& indices);

/// Directory layout <root>/<class_id>/<sample>.bin plus manifest.cfg holding
/// the sensor size and class count.
void write_manifest_dataset(const std::string& root, const EventDataset& ds);
EventDataset load_manifest_dataset(const std::string& root);

}  // namespace sast
