/*
Copyright 2026 The acfid Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
you may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace acfid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed bytes: bad magic, truncation, trailing garbage.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A record breaks an event or dataset invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Content hash in a file or header does not match.
class HashMismatch : public Error {
public:
    using Error::Error;
};

/// Bad argument or precondition (sizes, ranges, configuration).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Range coder fault: symbol outside alphabet, exhausted payload.
class CoderError : public Error {
public:
    using Error::Error;
};

} // namespace acfid
