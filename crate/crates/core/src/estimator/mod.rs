//! Pressure and sensitivity quantification by stress sweeps against a node
//! probe.

mod probe;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use probe::{NodeProbe, SimulatedProbe};

use crate::error::{Result, UrsaError};
use crate::profile::{to_level, InterferenceProfile, NodeConstants, ResourceLevels, SharedResource};
use crate::spec::ResourceSpec;

pub const REFERENCE_TRACKS_SCHEMA: u32 = 1;
pub const PROFILE_SET_SCHEMA: u32 = 1;

/// Relative change treated as a measurable effect.
pub const DEGRADATION_THRESHOLD: f64 = 0.10;

/// Miss rates (kilo-misses/s) for way allocations 1..=W; entry `w - 1`
/// holds the rate with `w` ways.
pub type KmpsTrack = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrack {
    pub level: u32,
    pub kmps: KmpsTrack,
}

/// Stress-program tracks for every LLC pressure level, collected once per
/// node type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTracks {
    pub schema_version: u32,
    pub llc_ways: u32,
    pub tracks: Vec<ReferenceTrack>,
}

impl ReferenceTracks {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: ReferenceTracks = serde_json::from_str(&fs::read_to_string(path)?)?;
        if t.schema_version != REFERENCE_TRACKS_SCHEMA {
            return Err(UrsaError::invalid(format!(
                "unsupported reference track schema {}",
                t.schema_version
            )));
        }
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Runs the LLC stress program at every level 0..=N on an otherwise idle
/// node.
pub fn calibrate(probe: &mut impl NodeProbe) -> Result<ReferenceTracks> {
    let c = probe.constants().clone();
    let tracks = (0..=c.levels.llc)
        .map(|level| {
            let kmps = probe.run_llc_stressor(level)?;
            if kmps.len() != c.llc_ways as usize {
                return Err(UrsaError::Probe(format!(
                    "stressor track has {} entries for {} ways",
                    kmps.len(),
                    c.llc_ways
                )));
            }
            Ok(ReferenceTrack { level, kmps })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceTracks {
        schema_version: REFERENCE_TRACKS_SCHEMA,
        llc_ways: c.llc_ways,
        tracks,
    })
}

pub fn track_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Sweeps ways from W down to 1 and records the target's miss rates.
pub fn record_track(probe: &mut impl NodeProbe) -> Result<KmpsTrack> {
    let w = probe.constants().llc_ways;
    let mut track = vec![0.0; w as usize];
    for ways in (1..=w).rev() {
        track[ways as usize - 1] = probe.set_llc_ways(ways)?;
    }
    probe.set_llc_ways(w)?;
    Ok(track)
}

/// Pressure is the level of the nearest reference track; sensitivity is the
/// way count at which the miss rate first rises by 10% over the full-cache
/// rate, mapped onto the level scale.
pub fn quantify_llc(probe: &mut impl NodeProbe, reference: &ReferenceTracks) -> Result<ResourceLevels> {
    if reference.tracks.is_empty() {
        return Err(UrsaError::invalid("empty reference track set"));
    }
    let c = probe.constants().clone();
    if reference.llc_ways != c.llc_ways
        || reference
            .tracks
            .iter()
            .any(|t| t.kmps.len() != c.llc_ways as usize)
    {
        return Err(UrsaError::invalid(format!(
            "reference tracks were not collected at {} ways",
            c.llc_ways
        )));
    }
    let track = record_track(probe)?;
    let mut best = (reference.tracks[0].level, f64::INFINITY);
    for t in &reference.tracks {
        let d = track_distance(&track, &t.kmps);
        if d < best.1 {
            best = (t.level, d);
        }
    }
    let full = track[c.llc_ways as usize - 1];
    let ways = if full > 0.0 {
        (1..=c.llc_ways)
            .rev()
            .find(|w| track[*w as usize - 1] >= (1.0 + DEGRADATION_THRESHOLD) * full)
            .unwrap_or(0)
    } else {
        0
    };
    let n = c.levels.llc;
    Ok(ResourceLevels::new(
        best.0.min(n),
        to_level(ways as f64 * n as f64 / c.llc_ways as f64, n),
    ))
}

/// `N - Max`, where `Max` is one below the first stress level (ascending
/// from 1) that cuts usage by at least 10%, or `N` if none does.
pub fn stress_sensitivity(
    probe: &mut impl NodeProbe,
    resource: SharedResource,
    n_levels: u32,
) -> Result<u32> {
    let base = probe.apply_stress(resource, 0)?;
    if base <= 0.0 {
        return Ok(0);
    }
    for level in 1..=n_levels {
        let u = probe.apply_stress(resource, level)?;
        if u <= (1.0 - DEGRADATION_THRESHOLD) * base {
            return Ok(n_levels - (level - 1));
        }
    }
    Ok(0)
}

fn check_levels(n_levels: u32) -> Result<()> {
    if n_levels == 0 {
        return Err(UrsaError::invalid("level count must be at least 1"));
    }
    Ok(())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(UrsaError::invalid(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

pub fn quantify_membw(probe: &mut impl NodeProbe, n_levels: u32) -> Result<ResourceLevels> {
    check_levels(n_levels)?;
    let phy = probe.constants().phy_mbw_gbps;
    positive("physical memory bandwidth", phy)?;
    let usage = probe.read_usage(SharedResource::MemoryBandwidth)?;
    Ok(ResourceLevels::new(
        to_level(n_levels as f64 * usage / phy, n_levels),
        stress_sensitivity(probe, SharedResource::MemoryBandwidth, n_levels)?,
    ))
}

pub fn quantify_disk(probe: &mut impl NodeProbe, n_levels: u32, iops_scaler: f64) -> Result<ResourceLevels> {
    check_levels(n_levels)?;
    positive("IOPS scaler", iops_scaler)?;
    let iops = probe.read_usage(SharedResource::Disk)?;
    Ok(ResourceLevels::new(
        to_level(iops / iops_scaler, n_levels),
        stress_sensitivity(probe, SharedResource::Disk, n_levels)?,
    ))
}

pub fn quantify_network(probe: &mut impl NodeProbe, n_levels: u32) -> Result<ResourceLevels> {
    check_levels(n_levels)?;
    let phy = probe.constants().phy_nbw_gbps;
    positive("physical network bandwidth", phy)?;
    let usage = probe.read_usage(SharedResource::Network)?;
    Ok(ResourceLevels::new(
        to_level(n_levels as f64 * usage / phy, n_levels),
        stress_sensitivity(probe, SharedResource::Network, n_levels)?,
    ))
}

/// Quantifies the four resources one after another.
pub fn build_profile(probe: &mut impl NodeProbe, reference: &ReferenceTracks) -> Result<InterferenceProfile> {
    let c: NodeConstants = probe.constants().clone();
    let mut p = InterferenceProfile::idle();
    p[SharedResource::Llc] = quantify_llc(probe, reference)?;
    p[SharedResource::MemoryBandwidth] = quantify_membw(probe, c.levels.memory_bandwidth)?;
    p[SharedResource::Disk] = quantify_disk(probe, c.levels.disk, c.iops_scaler)?;
    p[SharedResource::Network] = quantify_network(probe, c.levels.network)?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub workload_id: u64,
    /// Specification the workload ran with while being measured.
    pub spec: ResourceSpec,
    pub profile: InterferenceProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub schema_version: u32,
    pub profiles: Vec<ProfileRecord>,
}

impl ProfileSet {
    pub fn new(profiles: Vec<ProfileRecord>) -> Self {
        ProfileSet {
            schema_version: PROFILE_SET_SCHEMA,
            profiles,
        }
    }

    pub fn get(&self, workload_id: u64) -> Option<&ProfileRecord> {
        self.profiles.iter().find(|p| p.workload_id == workload_id)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: ProfileSet = serde_json::from_str(&fs::read_to_string(path)?)?;
        if s.schema_version != PROFILE_SET_SCHEMA {
            return Err(UrsaError::invalid(format!(
                "unsupported profile set schema {}",
                s.schema_version
            )));
        }
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_archetypes, Footprint};

    fn constants() -> NodeConstants {
        NodeConstants::default()
    }

    fn probe(fp: Footprint) -> SimulatedProbe {
        SimulatedProbe::new(fp, constants())
    }

    fn tracks() -> ReferenceTracks {
        calibrate(&mut SimulatedProbe::calibration(constants())).unwrap()
    }

    #[test]
    fn idle_workload_has_idle_profile() {
        let mut p = probe(Footprint::idle(11));
        assert_eq!(
            build_profile(&mut p, &tracks()).unwrap(),
            InterferenceProfile::idle()
        );
    }

    #[test]
    fn flat_track_is_insensitive_and_exact_track_matches_level() {
        let mut fp = Footprint::idle(11);
        fp.llc_kmps = 3.0 * constants().kmps_per_level;
        let r = quantify_llc(&mut probe(fp), &tracks()).unwrap();
        assert_eq!(r, ResourceLevels::new(3, 0));
    }

    #[test]
    fn membw_examples() {
        let mut c = constants();
        c.phy_mbw_gbps = 20.0;
        let mut fp = Footprint::idle(11);
        fp.membw_gbps = 5.0;
        let mut p = SimulatedProbe::new(fp, c.clone());
        assert_eq!(quantify_membw(&mut p, 20).unwrap().pressure, 5);

        // unaffected at every level
        assert_eq!(quantify_membw(&mut p, 20).unwrap().sensitivity, 0);
        // degraded at level 1
        fp.membw_sensitivity = 20.0;
        let mut p = SimulatedProbe::new(fp, c.clone());
        assert_eq!(quantify_membw(&mut p, 20).unwrap().sensitivity, 20);

        c.phy_mbw_gbps = 0.0;
        assert!(quantify_membw(&mut SimulatedProbe::new(fp, c), 20).is_err());
    }

    #[test]
    fn disk_and_network_examples() {
        let mut fp = Footprint::idle(11);
        fp.disk_iops = 4500.0;
        fp.net_gbps = 2.5;
        let mut p = probe(fp);
        assert_eq!(quantify_disk(&mut p, 20, 1000.0).unwrap().pressure, 5);
        assert_eq!(quantify_network(&mut p, 20).unwrap().pressure, 2);
        assert!(quantify_disk(&mut p, 20, 0.0).is_err());

        fp.net_gbps = 25.0;
        assert_eq!(quantify_network(&mut probe(fp), 20).unwrap().pressure, 20);
        fp.disk_iops = 0.0;
        assert_eq!(
            quantify_disk(&mut probe(fp), 20, 1000.0).unwrap(),
            ResourceLevels::new(0, 0)
        );
    }

    #[test]
    fn empty_reference_set_rejected() {
        let mut t = tracks();
        t.tracks.clear();
        assert!(quantify_llc(&mut probe(Footprint::idle(11)), &t).is_err());
    }

    #[test]
    fn sensitivity_plus_max_is_n() {
        for s in 0..=20 {
            let mut fp = Footprint::idle(11);
            fp.disk_iops = 100.0;
            fp.disk_sensitivity = s as f64;
            let got = quantify_disk(&mut probe(fp), 20, 1000.0).unwrap().sensitivity;
            assert_eq!(got, s);
        }
    }

    #[test]
    fn recovers_ground_truth_of_random_archetypes() {
        let c = constants();
        let t = tracks();
        for a in generate_archetypes(100, 42).unwrap() {
            let truth = a.footprint.levels(&c);
            let got = build_profile(&mut probe(a.footprint), &t).unwrap();
            for r in SharedResource::ALL {
                assert!(got[r].pressure.abs_diff(truth[r].pressure) <= 1, "{r} {a:?}");
                assert!(
                    got[r].sensitivity.abs_diff(truth[r].sensitivity) <= 1,
                    "{r} {a:?}"
                );
            }
        }
    }

    #[test]
    fn profile_set_round_trip() {
        let set = ProfileSet::new(vec![ProfileRecord {
            workload_id: 4,
            spec: ResourceSpec::new(6, 8),
            profile: InterferenceProfile::idle(),
        }]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        set.save(&path).unwrap();
        assert_eq!(ProfileSet::load(&path).unwrap(), set);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"memory_bandwidth\""));
        assert!(text.contains("\"pressure\""));
    }
}
