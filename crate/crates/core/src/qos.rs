//! QoS mapping tables: PCP→DSCP at the NW-TT, DSCP→QFI at the UPF traffic
//! flow filter, per-UE QFI→DRB at the SDAP layer, and DSCP→PCP at the DS-TT.
//!
//! All maps are total over their valid domains; unmapped values fall back to
//! best effort (0) so misconfiguration can never drop traffic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Best-effort fallback for unmapped DSCP and QFI values.
pub const BEST_EFFORT: u8 = 0;

/// Static mapping tables shared by both translators and the UPF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QosProfile {
    pcp_to_dscp: [u8; 8],
    dscp_to_qfi: BTreeMap<u8, u8>,
    dscp_to_pcp: BTreeMap<u8, u8>,
}

impl Default for QosProfile {
    /// Identity profile on 0..=7, mirroring the equal-numeral mappings of
    /// the validated setup (PCP 6 → DSCP 6 → QFI 6, PCP 0 → DSCP 0 → QFI 0).
    fn default() -> Self {
        let mut dscp_to_qfi = BTreeMap::new();
        let mut dscp_to_pcp = BTreeMap::new();
        for v in 0..8u8 {
            dscp_to_qfi.insert(v, v);
            dscp_to_pcp.insert(v, v);
        }
        QosProfile {
            pcp_to_dscp: [0, 1, 2, 3, 4, 5, 6, 7],
            dscp_to_qfi,
            dscp_to_pcp,
        }
    }
}

impl QosProfile {
    pub fn new(
        pcp_to_dscp: [u8; 8],
        dscp_to_qfi: BTreeMap<u8, u8>,
        dscp_to_pcp: BTreeMap<u8, u8>,
    ) -> Self {
        QosProfile {
            pcp_to_dscp,
            dscp_to_qfi,
            dscp_to_pcp,
        }
    }

    pub fn map_pcp_to_dscp(&self, pcp: u8) -> u8 {
        debug_assert!(pcp <= 7);
        self.pcp_to_dscp[usize::from(pcp & 0x7)]
    }

    pub fn map_dscp_to_qfi(&self, dscp: u8) -> u8 {
        self.dscp_to_qfi.get(&dscp).copied().unwrap_or(BEST_EFFORT)
    }

    pub fn map_dscp_to_pcp(&self, dscp: u8) -> u8 {
        self.dscp_to_pcp.get(&dscp).copied().unwrap_or(BEST_EFFORT)
    }

    /// Class preservation: DSCP→PCP must invert PCP→DSCP for every PCP the
    /// profile maps. Returns the offending PCPs, empty when preserving.
    pub fn class_preservation_violations(&self) -> Vec<u8> {
        (0..8u8)
            .filter(|&pcp| self.map_dscp_to_pcp(self.map_pcp_to_dscp(pcp)) != pcp)
            .collect()
    }
}

/// One SDAP mapping entry: a DRB and the QFIs it carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrbEntry {
    pub drb: u8,
    pub qfi_list: Vec<u8>,
}

/// Per-UE SDAP DRB configuration. The entry carrying QFI 0 doubles as the
/// default bearer for unmapped QFIs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrbConfig {
    pub ue_id: u16,
    pub entries: Vec<DrbEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DrbConfigIssue {
    DuplicateQfi { qfi: u8 },
    MissingDefault,
    EmptyEntries,
    EmptyQfiList { drb: u8 },
}

impl std::fmt::Display for DrbConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DrbConfigIssue::DuplicateQfi { qfi } => {
                write!(f, "qfi {qfi} mapped by more than one drb entry")
            }
            DrbConfigIssue::MissingDefault => {
                write!(f, "no entry carries qfi 0 (default bearer)")
            }
            DrbConfigIssue::EmptyEntries => write!(f, "drb config has no entries"),
            DrbConfigIssue::EmptyQfiList { drb } => {
                write!(f, "drb {drb} entry has an empty qfi list")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrbValidation {
    pub issues: Vec<DrbConfigIssue>,
}

impl DrbValidation {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl DrbConfig {
    pub fn new(ue_id: u16, entries: Vec<DrbEntry>) -> Self {
        DrbConfig { ue_id, entries }
    }

    /// Resolve the DRB carrying `qfi`; unmapped QFIs take the default entry.
    pub fn map_qfi_to_drb(&self, qfi: u8) -> u8 {
        self.entries
            .iter()
            .find(|e| e.qfi_list.contains(&qfi))
            .or_else(|| self.default_entry())
            .map(|e| e.drb)
            .unwrap_or(0)
    }

    fn default_entry(&self) -> Option<&DrbEntry> {
        self.entries
            .iter()
            .find(|e| e.qfi_list.contains(&BEST_EFFORT))
    }

    pub fn validate(&self) -> DrbValidation {
        let mut issues = Vec::new();
        if self.entries.is_empty() {
            issues.push(DrbConfigIssue::EmptyEntries);
        }
        let mut seen: BTreeMap<u8, u8> = BTreeMap::new();
        for entry in &self.entries {
            if entry.qfi_list.is_empty() {
                issues.push(DrbConfigIssue::EmptyQfiList { drb: entry.drb });
            }
            for &qfi in &entry.qfi_list {
                if seen.insert(qfi, entry.drb).is_some() {
                    issues.push(DrbConfigIssue::DuplicateQfi { qfi });
                }
            }
        }
        if self.default_entry().is_none() {
            issues.push(DrbConfigIssue::MissingDefault);
        }
        DrbValidation { issues }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2_config() -> DrbConfig {
        DrbConfig::new(
            2049,
            vec![
                DrbEntry {
                    drb: 0,
                    qfi_list: vec![0],
                },
                DrbEntry {
                    drb: 1,
                    qfi_list: vec![6],
                },
            ],
        )
    }

    #[test]
    fn default_profile_is_identity() {
        let p = QosProfile::default();
        assert_eq!(p.map_pcp_to_dscp(6), 6);
        assert_eq!(p.map_pcp_to_dscp(0), 0);
        assert_eq!(p.map_dscp_to_qfi(6), 6);
        assert_eq!(p.map_dscp_to_qfi(0), 0);
        assert_eq!(p.map_dscp_to_pcp(6), 6);
    }

    #[test]
    fn unmapped_dscp_defaults_to_best_effort() {
        let p = QosProfile::default();
        assert_eq!(p.map_dscp_to_qfi(45), 0);
        assert_eq!(p.map_dscp_to_pcp(26), 0);
    }

    #[test]
    fn custom_tables_look_up() {
        let mut pcp_to_dscp = [0u8; 8];
        pcp_to_dscp[3] = 26;
        let mut dscp_to_pcp = BTreeMap::new();
        dscp_to_pcp.insert(26, 3);
        let p = QosProfile::new(pcp_to_dscp, BTreeMap::new(), dscp_to_pcp);
        assert_eq!(p.map_pcp_to_dscp(3), 26);
        assert_eq!(p.map_dscp_to_pcp(26), 3);
    }

    #[test]
    fn class_preservation_holds_for_default_profile() {
        assert!(QosProfile::default()
            .class_preservation_violations()
            .is_empty());
    }

    #[test]
    fn table2_qfi_to_drb() {
        let cfg = table2_config();
        assert_eq!(cfg.map_qfi_to_drb(6), 1);
        assert_eq!(cfg.map_qfi_to_drb(0), 0);
        assert_eq!(cfg.map_qfi_to_drb(9), 0); // default entry
    }

    #[test]
    fn validate_accepts_table2_config() {
        assert!(table2_config().validate().is_valid());
    }

    #[test]
    fn validate_reports_duplicate_qfi() {
        let cfg = DrbConfig::new(
            2049,
            vec![
                DrbEntry {
                    drb: 0,
                    qfi_list: vec![0, 6],
                },
                DrbEntry {
                    drb: 1,
                    qfi_list: vec![6],
                },
            ],
        );
        let report = cfg.validate();
        assert_eq!(report.issues, vec![DrbConfigIssue::DuplicateQfi { qfi: 6 }]);
    }

    #[test]
    fn validate_reports_missing_default_on_empty_config() {
        let report = DrbConfig::new(2049, vec![]).validate();
        assert!(report.issues.contains(&DrbConfigIssue::EmptyEntries));
        assert!(report.issues.contains(&DrbConfigIssue::MissingDefault));
    }

    #[test]
    fn flow_separation_under_table2_profile() {
        let p = QosProfile::default();
        let cfg = table2_config();
        let drb_high = cfg.map_qfi_to_drb(p.map_dscp_to_qfi(p.map_pcp_to_dscp(6)));
        let drb_be = cfg.map_qfi_to_drb(p.map_dscp_to_qfi(p.map_pcp_to_dscp(0)));
        assert_ne!(drb_high, drb_be);
    }
}
