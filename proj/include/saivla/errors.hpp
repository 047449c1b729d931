#pragma once

#include <stdexcept>
#include <string>

namespace saivla {

// Precondition violations (bad shapes, ranges, values).
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Not enough data to compute a statistic.
class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf surfaced where a finite value is required.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Archive error family.
class CacheError : public std::runtime_error {
public:
    explicit CacheError(const std::string& what) : std::runtime_error(what) {}
};

class NotACache : public CacheError {
public:
    explicit NotACache(const std::string& what) : CacheError(what) {}
};

class CorruptArchive : public CacheError {
public:
    explicit CorruptArchive(const std::string& what) : CacheError(what) {}
};

class IncompleteArchive : public CacheError {
public:
    explicit IncompleteArchive(const std::string& what) : CacheError(what) {}
};

class InvalidPrompt : public std::runtime_error {
public:
    explicit InvalidPrompt(const std::string& what) : std::runtime_error(what) {}
};

// Projection landed behind the camera plane; caller must fall back.
class BehindCamera : public std::runtime_error {
public:
    explicit BehindCamera(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace saivla
