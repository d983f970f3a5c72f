// Client-side parsing of user data, matching the service's file rules:
// newline-delimited voltage values (blank lines skipped) and comma-separated
// APD lists. Parsing happens in the browser; only numeric arrays are posted.

export function parseVoltageText(text: string): number[] {
  const values: number[] = [];
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const stripped = lines[i].trim();
    if (stripped === "") continue;
    const value = Number(stripped);
    if (!Number.isFinite(value)) {
      throw new Error(`line ${i + 1}: not a number: ${stripped}`);
    }
    values.push(value);
  }
  if (values.length === 0) {
    throw new Error("file contains no samples");
  }
  return values;
}

export function parseApdList(text: string): number[] {
  if (text.trim() === "") {
    throw new Error("APD list is empty");
  }
  const entries = text.split(",");
  const values: number[] = [];
  for (let i = 0; i < entries.length; i++) {
    const stripped = entries[i].trim();
    if (stripped === "") {
      throw new Error(`entry ${i + 1}: empty APD value`);
    }
    const value = Number(stripped);
    if (!Number.isFinite(value)) {
      throw new Error(`entry ${i + 1}: not a number: ${stripped}`);
    }
    values.push(value);
  }
  return values;
}
