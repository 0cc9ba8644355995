//! Seeded generators for the bundled CSV datasets.

use std::fmt::Write;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const COUNTRIES: [&str; 8] =
    ["United States", "India", "United Kingdom", "Canada", "Germany", "Japan", "Brazil", "Australia"];
pub const DEVICES: [&str; 3] = ["desktop", "mobile", "tablet"];
pub const CHANNELS: [&str; 7] = ["Organic Search", "Paid Search", "Display", "Referral", "Social", "Email", "Direct"];

pub struct Campaign {
    pub id: i64,
    pub name: &'static str,
    pub channel: &'static str,
    pub start: &'static str,
}

pub const CAMPAIGNS: [Campaign; 12] = [
    Campaign { id: 1, name: "Summer Sale", channel: "Paid Search", start: "2017-06-01" },
    Campaign { id: 2, name: "Back to School", channel: "Paid Search", start: "2016-08-15" },
    Campaign { id: 3, name: "Holiday Push", channel: "Display", start: "2016-11-20" },
    Campaign { id: 4, name: "Spring Launch", channel: "Display", start: "2017-03-01" },
    Campaign { id: 5, name: "Brand Awareness", channel: "Display", start: "2016-09-01" },
    Campaign { id: 6, name: "Retargeting Wave", channel: "Paid Search", start: "2017-01-10" },
    Campaign { id: 7, name: "Newsletter Promo", channel: "Email", start: "2016-10-05" },
    Campaign { id: 8, name: "Loyalty Rewards", channel: "Email", start: "2017-02-14" },
    Campaign { id: 9, name: "Influencer Collab", channel: "Social", start: "2017-04-20" },
    Campaign { id: 10, name: "Video Teaser", channel: "Social", start: "2016-12-01" },
    Campaign { id: 11, name: "Black Friday Blitz", channel: "Paid Search", start: "2016-11-25" },
    Campaign { id: 12, name: "Flash Deals", channel: "Email", start: "2017-05-05" },
];

pub fn slug(name: &str) -> String {
    name.to_lowercase().replace(' ', "-")
}

pub fn landing_url(name: &str) -> String {
    format!("https://shop.example.com/campaigns/{}", slug(name))
}

pub const SESSIONS_START: &str = "2016-08-01";
pub const SESSION_ROWS: usize = 10_000;

fn cents(c: i64) -> String {
    let sign = if c < 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", c.abs() / 100, c.abs() % 100)
}

/// One row per (day, country, device, channel) slice sample; dates run
/// 2016-08-01 through 2017-08-01.
pub fn ga_sessions_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(20170801);
    let start: NaiveDate = SESSIONS_START.parse().expect("literal date");
    let mut out = String::from("date,country,device,channel,campaign_id,sessions,users,pageviews,transactions,revenue\n");
    for i in 0..SESSION_ROWS {
        let date = start + Duration::days((i * 366 / SESSION_ROWS) as i64);
        let country = COUNTRIES[[0, 0, 0, 1, 1, 2, 2, 3, 4, 5, 6, 7][rng.gen_range(0..12)]];
        let device = DEVICES[[0, 0, 1, 1, 1, 2][rng.gen_range(0..6)]];
        let channel = *CHANNELS.choose(&mut rng).expect("non-empty");
        let campaigns: Vec<&Campaign> = CAMPAIGNS.iter().filter(|c| c.channel == channel).collect();
        let campaign = if campaigns.is_empty() || rng.gen_bool(0.15) {
            String::new()
        } else {
            campaigns[rng.gen_range(0..campaigns.len())].id.to_string()
        };
        let sessions: i64 = rng.gen_range(1..=80);
        let users = ((sessions as f64) * rng.gen_range(0.6..1.0)).round().max(1.0) as i64;
        let pageviews = sessions * rng.gen_range(1..=7);
        let transactions = if rng.gen_bool(0.55) { rng.gen_range(0..=sessions / 8 + 1) } else { 0 };
        let revenue: i64 = (0..transactions).map(|_| rng.gen_range(2_000..25_000)).sum();
        writeln!(
            out,
            "{date},{country},{device},{channel},{campaign},{sessions},{users},{pageviews},{transactions},{}",
            cents(revenue)
        )
        .expect("write to string");
    }
    out
}

pub fn campaigns_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut out = String::from(
        "campaign_id,campaign_name,channel,start_date,cost,clicks,impressions,conversions,conversion_value,landing_url\n",
    );
    for c in &CAMPAIGNS {
        let impressions: i64 = rng.gen_range(50_000..500_000);
        let clicks = (impressions as f64 * rng.gen_range(0.005..0.04)).round() as i64;
        let conversions = (clicks as f64 * rng.gen_range(0.01..0.08)).round() as i64;
        let cost = (clicks as f64 * rng.gen_range(40.0..250.0)).round() as i64;
        let value = (conversions as f64 * rng.gen_range(3_000.0..12_000.0)).round() as i64;
        writeln!(
            out,
            "{},{},{},{},{},{clicks},{impressions},{conversions},{},{}",
            c.id,
            c.name,
            c.channel,
            c.start,
            cents(cost),
            cents(value),
            landing_url(c.name)
        )
        .expect("write to string");
    }
    out
}

/// Per-location average price change in thousands, as shown in the
/// property-sales walkthrough.
pub const LOCATION_CHANGE: [(&str, i64); 5] =
    [("New York", 8405), ("Houston", 7249), ("Chicago", 3345), ("Los Angeles", 1319), ("Phoenix", -244)];

pub fn properties_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rows: Vec<(String, NaiveDate, i64, i64)> = Vec::new();
    for (loc, avg) in LOCATION_CHANGE {
        let d: Vec<i64> = (0..3).map(|_| rng.gen_range(-1_500..1_500)).collect();
        let offsets = [d[0], d[1], d[2], -(d[0] + d[1] + d[2])];
        for off in offsets {
            let list = rng.gen_range(25_000..90_000);
            let listed = NaiveDate::from_ymd_opt(2017, 1, 1).expect("literal") + Duration::days(rng.gen_range(0..180));
            rows.push((loc.to_string(), listed, list, list + avg + off));
        }
    }
    rows.shuffle(&mut rng);
    let mut out = String::from("property_id,location,listed_on,list_price,sale_price,price_change\n");
    for (i, (loc, listed, list, sale)) in rows.into_iter().enumerate() {
        writeln!(out, "{},{loc},{listed},{},{},{}", 101 + i, cents(list), cents(sale), cents(sale - list))
            .expect("write to string");
    }
    out
}
