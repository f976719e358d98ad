/**
 * uvforge/1 wire protocol: request/response schemas for POST /v1/sample.
 *
 * Requests are canonical JSON (every field present, sorted keys); images
 * travel as base64 PNG. The schema is strict so that any field drift on
 * either side of the protocol shows up as a 422 instead of passing
 * silently.
 */

import { z } from "zod";

export const SAMPLE_KINDS = ["generate", "inpaint", "uv_inpaint", "uv_hd"] as const;

export type SampleKind = (typeof SAMPLE_KINDS)[number];

export const sampleRequestSchema = z.strictObject({
  kind: z.enum(SAMPLE_KINDS),
  prompt: z.string().nullable(),
  negative_prompt: z.string().nullable(),
  reference_image_b64: z.string().nullable(),
  init_image_b64: z.string().nullable(),
  keep_mask_b64: z.string().nullable(),
  control_image_b64: z.string().nullable(),
  control_kind: z.enum(["depth", "position"]).nullable(),
  seed: z.number().int(),
  strength: z.number().min(0).max(1),
  width: z.number().int().positive(),
  height: z.number().int().positive(),
});

export type SampleRequest = z.infer<typeof sampleRequestSchema>;

export const sampleResponseSchema = z.strictObject({
  image_b64: z.string(),
  backend_id: z.string(),
});

export type SampleResponse = z.infer<typeof sampleResponseSchema>;

export interface ErrorBody {
  message: string;
}

/** Turn a zod failure into a one-line 422 message. */
export function describeIssues(error: z.ZodError): string {
  return error.issues
    .map((issue) => {
      const path = issue.path.join(".");
      return path ? `${path}: ${issue.message}` : issue.message;
    })
    .join("; ");
}
