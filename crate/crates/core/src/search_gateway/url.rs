/// The URL could not be parsed as an absolute URL with a host.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid url {url:?}: {reason}")]
pub struct UrlError {
    pub url: String,
    pub reason: String,
}

fn default_port(scheme: &str) -> Option<&'static str> {
    match scheme {
        "http" | "ws" => Some("80"),
        "https" | "wss" => Some("443"),
        "ftp" => Some("21"),
        _ => None,
    }
}

/// Canonical form used for cache keys and overlap comparison.
///
/// Lowercases the scheme and host, drops the fragment and a default port,
/// and leaves userinfo, path and query byte-for-byte as given.
pub fn normalize_url(raw: &str) -> Result<String, UrlError> {
    let err = |reason: &str| UrlError {
        url: raw.to_owned(),
        reason: reason.to_owned(),
    };
    let trimmed = raw.trim();
    let parsed = url::Url::parse(trimmed).map_err(|e| err(&e.to_string()))?;
    if parsed.cannot_be_a_base() || parsed.host_str().is_none() {
        return Err(err("not an absolute URL with a host"));
    }

    let (scheme, rest) = trimmed
        .split_once("://")
        .ok_or_else(|| err("missing `://`"))?;
    let scheme = scheme.to_ascii_lowercase();
    let without_fragment = rest.split('#').next().unwrap_or_default();
    let authority_end = without_fragment
        .find(['/', '?'])
        .unwrap_or(without_fragment.len());
    let (authority, tail) = without_fragment.split_at(authority_end);

    let (userinfo, hostport) = match authority.rfind('@') {
        Some(at) => authority.split_at(at + 1),
        None => ("", authority),
    };
    // IPv6 literals carry colons inside brackets.
    let port_sep = match hostport.rfind(']') {
        Some(close) => hostport[close..].find(':').map(|i| close + i),
        None => hostport.rfind(':'),
    };
    let (host, port) = match port_sep {
        Some(i) => (&hostport[..i], Some(&hostport[i + 1..])),
        None => (hostport, None),
    };
    if host.is_empty() {
        return Err(err("empty host"));
    }

    let mut out = String::with_capacity(trimmed.len());
    out.push_str(&scheme);
    out.push_str("://");
    out.push_str(userinfo);
    out.push_str(&host.to_lowercase());
    if let Some(port) = port {
        if !port.is_empty() && Some(port) != default_port(&scheme) {
            out.push(':');
            out.push_str(port);
        }
    }
    out.push_str(tail);
    Ok(out)
}
