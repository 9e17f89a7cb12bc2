use serde::{Deserialize, Serialize};

use crate::error::{Result, UrsaError};

pub const INDEX_COUNT: usize = 15;

pub const INDEX_NAMES: [&str; INDEX_COUNT] = [
    "ipc",
    "dtlb_store_misses",
    "cache_misses",
    "node_stores",
    "io_read_bytes",
    "io_serviced_read",
    "memory_usage",
    "cpu_usage",
    "page_fault",
    "dtlb_load_misses",
    "cache_references",
    "node_loads",
    "io_write_bytes",
    "io_serviced_write",
    "dirty_memory",
];

pub const CACHE_MISSES: usize = 2;
pub const CACHE_REFERENCES: usize = 10;

/// OS and hardware-counter statistics of one workload, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemIndexVector {
    pub ipc: f64,
    pub dtlb_store_misses: f64,
    pub cache_misses: f64,
    pub node_stores: f64,
    pub io_read_bytes: f64,
    pub io_serviced_read: f64,
    pub memory_usage: f64,
    pub cpu_usage: f64,
    pub page_fault: f64,
    pub dtlb_load_misses: f64,
    pub cache_references: f64,
    pub node_loads: f64,
    pub io_write_bytes: f64,
    pub io_serviced_write: f64,
    pub dirty_memory: f64,
}

impl SystemIndexVector {
    pub fn from_array(v: [f64; INDEX_COUNT]) -> Self {
        SystemIndexVector {
            ipc: v[0],
            dtlb_store_misses: v[1],
            cache_misses: v[2],
            node_stores: v[3],
            io_read_bytes: v[4],
            io_serviced_read: v[5],
            memory_usage: v[6],
            cpu_usage: v[7],
            page_fault: v[8],
            dtlb_load_misses: v[9],
            cache_references: v[10],
            node_loads: v[11],
            io_write_bytes: v[12],
            io_serviced_write: v[13],
            dirty_memory: v[14],
        }
    }

    pub fn to_array(&self) -> [f64; INDEX_COUNT] {
        [
            self.ipc,
            self.dtlb_store_misses,
            self.cache_misses,
            self.node_stores,
            self.io_read_bytes,
            self.io_serviced_read,
            self.memory_usage,
            self.cpu_usage,
            self.page_fault,
            self.dtlb_load_misses,
            self.cache_references,
            self.node_loads,
            self.io_write_bytes,
            self.io_serviced_write,
            self.dirty_memory,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.to_array().iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(UrsaError::invalid(format!(
                "index {} is not finite",
                INDEX_NAMES[i]
            ))),
        }
    }

    /// Clamps every component non-negative and caps misses at references.
    pub(crate) fn sanitized(mut v: [f64; INDEX_COUNT]) -> Self {
        for x in &mut v {
            *x = x.max(0.0);
        }
        if v[CACHE_MISSES] > v[CACHE_REFERENCES] {
            v[CACHE_MISSES] = v[CACHE_REFERENCES];
        }
        SystemIndexVector::from_array(v)
    }
}
