#pragma once

#include <string>
#include <string_view>

#include "dagpo/training.hpp"

namespace dagpo {

// Flat key=value run configuration. '#' lines are comments, later keys win,
// and the serialized form parses back to an identical config, so a run's
// archived copy reproduces it.
//
// Setting `phase` resets epochs, batch_size and learning_rate to that phase's
// defaults; place it before any of those overrides. `reward.datasets` resets
// the term list (weight 1, range [0,1]); weights/lo/hi lists must match its
// length and therefore come after it.
struct RunConfig {
    TrainConfig train;

    std::string dataset_path;     // paths.dataset
    std::string table_path;       // paths.table
    std::string checkpoint_path;  // paths.checkpoint
    std::string out_dir = "out";  // paths.out

    // Applies one key. Throws KeyError for unknown keys, ParseError for
    // malformed values, DimensionMismatch for list-length conflicts; messages
    // name the key.
    void set(const std::string& key, const std::string& value);

    std::string to_text() const;

    // Writes to_text() to <dir>/config.effective.
    void archive(const std::string& dir) const;

    // Errors gain a "<origin>:<line>:" prefix.
    static RunConfig from_text(std::string_view text,
                               const std::string& origin = "<config>");
    static RunConfig from_file(const std::string& path);
};

} // namespace dagpo
