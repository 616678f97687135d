#ifndef NSPVI_IO_HPP
#define NSPVI_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "nspvi/model.hpp"
#include "nspvi/predict.hpp"
#include "nspvi/train.hpp"

namespace nspvi {

// Dataset files: JSON lines, one sequence per line,
//   {"T": 20.0, "events": [{"t": 1.5, "k": 1}, ...]}
// Blank lines are skipped. Errors name the source, line and field.
std::vector<EventSeq> parse_dataset(std::istream& in, int num_types, const std::string& source);
std::vector<EventSeq> read_dataset(const std::string& path, int num_types);
void write_dataset(std::ostream& out, const std::vector<EventSeq>& data);
void write_dataset(const std::string& path, const std::vector<EventSeq>& data);

// Checkpoints: JSON container with a format tag, version, link convention,
// the model tables and both variational parameter sets.
inline constexpr int kCheckpointVersion = 1;
std::string checkpoint_to_string(const Posteriors& post);
Posteriors checkpoint_from_string(const std::string& text);
void save_checkpoint(const std::string& path, const Posteriors& post);
Posteriors load_checkpoint(const std::string& path);

// CSV emitters.
void write_train_log(std::ostream& out, const std::vector<TrainLogRecord>& log);
void write_validation_log(std::ostream& out, const std::vector<ValidationRecord>& log);
void write_predictions(std::ostream& out, const std::vector<PredictionRecord>& records);

// Opens for writing, creating parent directories; throws std::runtime_error
// naming the path on failure.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace nspvi

#endif  // NSPVI_IO_HPP
