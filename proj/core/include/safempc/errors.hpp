/*
 Copyright 2026 The SafeMPC Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef SAFEMPC_ERRORS_HPP_
#define SAFEMPC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace safempc
{
    /// Base class for all errors raised by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// A shape matrix lost positive definiteness (rank-deficient map, zero trace, ...).
    class DegenerateShapeError : public Error
    {
    public:
        using Error::Error;
    };

    /// Non-finite or dimensionally inconsistent input.
    class InvalidInputError : public Error
    {
    public:
        using Error::Error;
    };

    /// Gram matrix could not be factorized even after jitter escalation.
    class FitError : public Error
    {
    public:
        using Error::Error;
    };

    /// Iterative procedure (Riccati iteration, safe-set bisection) did not produce a result.
    class ConvergenceError : public Error
    {
    public:
        using Error::Error;
    };

    /// Malformed configuration file or value.
    class ConfigError : public Error
    {
    public:
        using Error::Error;
    };

} // namespace safempc

#endif // SAFEMPC_ERRORS_HPP_
