// Minimal typings for the papaparse API used here (the installed copy of
// the library ships without its own declarations).
declare module "papaparse" {
  export interface ParseError {
    type: string;
    code: string;
    message: string;
    row?: number;
  }
  export interface ParseResult<T> {
    data: T[];
    errors: ParseError[];
    meta: { fields?: string[] };
  }
  export interface ParseConfig {
    header?: boolean;
    skipEmptyLines?: boolean | "greedy";
  }
  function parse<T>(input: string, config?: ParseConfig): ParseResult<T>;
  const Papa: { parse: typeof parse };
  export default Papa;
}
