/** Error taxonomy shared by the extractor modules. */

/** Bad argument or configuration: wrong layer index, timestep out of range. */
export class ValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ValidationError";
  }
}

/** Malformed file on disk: bad magic, truncated payload, version mismatch. */
export class FormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "FormatError";
  }
}
