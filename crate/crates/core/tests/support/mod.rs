// SPDX-License-Identifier: Apache-2.0

//! Shared by the integration tests and the acceptance harness.

#![allow(dead_code)]

pub mod checks;
pub mod fixtures;
pub mod oracle;
