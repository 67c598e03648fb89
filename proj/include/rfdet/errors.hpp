// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rfdet {

class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates an operation's precondition (shape, range, length).
class invalid_input : public error {
public:
    using error::error;
};

/// Input is well-formed but carries no usable energy (all-zero frames,
/// empty masks, zero-variance planes).
class degenerate_input : public error {
public:
    using error::error;
};

/// A generator or model configuration cannot be realized.
class config_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

/// On-disk artifact failed to decode.
class format_error : public error {
public:
    enum class kind { version, truncated, checksum, schema };

    format_error(kind k, const std::string& what) : error(what), kind_(k) {}

    kind which() const noexcept { return kind_; }

private:
    kind kind_;
};

/// Non-finite loss during training.
class training_diverged : public error {
public:
    training_diverged(int epoch, std::size_t batch, const std::string& what)
        : error(what), epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    int epoch_;
    std::size_t batch_;
};

}  // namespace rfdet
