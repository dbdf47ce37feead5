//! Inputs shared by the benchmarks.

use std::fmt::Write;
use std::path::PathBuf;

/// The replay fixtures that ship with the core crate's tests.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// A login-page shaped document with `blocks` repeated sections, each with
/// text, a link, an image, an inline script and a form field.
pub fn synthetic_html(blocks: usize) -> String {
    let mut s = String::from("<html><head><title>Sign in to Example Bank</title><style>body{margin:0}</style></head><body>");
    for i in 0..blocks {
        let _ = write!(
            s,
            r#"<div class="row-{i}"><p>Paragraph {i} about account security and recent activity.</p>
<a href="https://example{}.com/path/{i}">link {i}</a><img src="/img/{i}.png" alt="image {i}">
<script>var x{i} = {i} * 2; track('{i}');</script><input type="password" name="p{i}" placeholder="Password"></div>"#,
            i % 13
        );
    }
    s.push_str("</body></html>");
    s
}
